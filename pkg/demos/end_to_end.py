# Generate one instance of every kind, solve it, and compare with brute force.
# Run: python3 demos/end_to_end.py

from nearlytu import fileformat as ff
from nearlytu import oracle
from nearlytu.generate import generate
from nearlytu.pipeline import solve_file

for kind in ff.KINDS:
    f = generate(kind, seed=3)
    text = ff.dumps(f)
    assert ff.dumps(ff.loads(text)) == text  # canonical JSON survives a round trip

    res = solve_file(f)
    rep = oracle.verify_pipeline(f, res)
    print(f"{kind:12s} status={res.status:10s} value={res.value}  oracle says {rep.status}")

# the same thing from a shell:
#   nearlytu gen --kind mcipp --seed 3 > inst.json
#   nearlytu verify inst.json
#   nearlytu check inst.json
