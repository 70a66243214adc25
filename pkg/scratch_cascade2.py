import math

from cflkit.cascade import (
    reconstruct_fiber,
    reduce_along_curves,
    sub_connection,
)
from cflkit.goursat import esfl_check
from cflkit.symexpr import parse

# --- sub-connection with a 3-dim fiber: two order-1 chains and one order-2
B = "z1_1 + (1 + z3_2)*z3_0 - ((t - 1)*z3_0 - 1/2*((t - 1)^2 + 1))*z2_0"
p1 = parse("z2_0")
p2 = parse("z2_0*(z3_0 - t)")
p3 = parse(f"({B}) - z2_0*(z3_0 + 1 - t)")
sub = sub_connection((2, 1), (p1, p2, p3))
assert sub.jets.chart.dim == 11, sub.jets.chart.dim

rel = sub.relative_recognition()
print("relative RDT:", rel.analysis.rdt)
assert rel.analysis.rdt == ((7, 3), (10, 6, 8), (11, 11)), rel.analysis.rdt
assert rel.kappa == (2, 1) or rel.kappa == [2, 1], rel.kappa
assert rel.is_goursat, rel.violations

red = reduce_along_curves(sub, {3: "f"})
assert red.spec.codimension == 3
rep = esfl_check(red.system)
print("reduced RDT:", rep.goursat.analysis.rdt)
assert rep.goursat.analysis.rdt == ((3, 0), (5, 2, 3), (6, 4, 4), (7, 5, 5), (8, 8))
assert rep.goursat.kappa == (1, 0, 0, 1) or rep.goursat.kappa == [1, 0, 0, 1], rep.goursat.kappa
assert rep.verdict, rep.reasons
print("sub-connection reduction ok")

# --- fiber reconstruction along a flat curve
rho = ((parse("exp(eps2)"), parse("1")), (parse("1"), parse("0")))
sub2 = sub_connection((1, 1), (parse("exp(z1_1)"), parse("0")), rho)
curves = {1: parse("t^2/2"), 2: parse("t^3/6")}
res = reconstruct_fiber(sub2, curves, (0.0, 0.0), 0.0, 1.0, 1000)
e1_exact = math.exp(math.e - 1) - 1
e2_exact = math.e - 1
err = max(abs(res.final[0] - e1_exact), abs(res.final[1] - e2_exact))
print("final:", res.final, "exact:", (e1_exact, e2_exact))
print("err:", err, "residual:", res.residual)
assert err < 1e-9
assert res.residual < 1e-6

rs = []
hs = []
for steps in (100, 200, 400):
    r = reconstruct_fiber(sub2, curves, (0.0, 0.0), 0.0, 1.0, steps)
    rs.append(r.residual)
    hs.append(1.0 / steps)
slope = (math.log(rs[0]) - math.log(rs[-1])) / (math.log(hs[0]) - math.log(hs[-1]))
print("residuals:", rs, "slope:", slope)
assert 3.7 <= slope <= 4.3, slope
print("reconstruction ok")
