import numpy as np
from openfermion.chem import MolecularData
from openfermionpyscf import run_pyscf
from openfermion.transforms import get_fermion_operator, jordan_wigner
from openfermion.linalg import get_sparse_operator
geometry=[('H',(0.,0.,0.)),('H',(0.,0.,0.7414))]
mol=MolecularData(geometry,'sto-3g',1,0)
mol=run_pyscf(mol,run_scf=1,run_fci=1)
qh=jordan_wigner(get_fermion_operator(mol.get_molecular_hamiltonian()))
qh.compress()
lines=[]
for term,coef in sorted(qh.terms.items(), key=lambda kv:(len(kv[0]),kv[0])):
    assert abs(coef.imag)<1e-14
    lines.append(repr(float(coef.real))+''.join(' %s%d'%(p,q) for q,p in term))
H=get_sparse_operator(qh,n_qubits=4).toarray()
ev=np.linalg.eigvalsh(H)[0]
print("\n".join(lines)); print("FCI",mol.fci_energy,"min eig",repr(ev))
