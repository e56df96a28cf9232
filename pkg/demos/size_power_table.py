"""A small-budget size/power table and its comparison with reference values.

With 200 replications the tolerance widens automatically; raise the
budget (or use ``lomn reproduce-table``) for a sharper comparison.
"""

from lomn.experiments import preset, run_experiment
from lomn.tables import compare

spec = preset("T2", 200, cells=((0.0005, 11),), bootstrap_m=1000)
result = run_experiment(spec)
print(result.to_csv())
for check in compare(result):
    print(check.line())
