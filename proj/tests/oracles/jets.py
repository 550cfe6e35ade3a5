# Regenerates the frozen derivative table in test_fnspec.cpp with exact symbolic differentiation.
import sympy as sp

t = sp.symbols("t")
cases = [
    ("sin(t)*t", "sin(t)*t", 0.7, 2),
    ("exp(sin(t))", "exp(sin(t))", 0.3, 6),
    ("log(1+t^2)", "log(1+t**2)", 1.7, 6),
    ("sqrt(2+cos(t))", "sqrt(2+cos(t))", -0.4, 5),
    ("tanh(t^2-1)", "tanh(t**2-1)", 0.9, 5),
    ("(1+t)^(-2.5)", "(1+t)**(-sp.Rational(5,2))", 0.6, 6),
    ("t^t", "t**t", 1.3, 5),
    ("exp(-t^2)/(2+sin(3*t))", "exp(-t**2)/(2+sin(3*t))", -1.1, 6),
    ("cos(exp(t))*log(t)", "cos(exp(t))*log(t)", 2.2, 4),
    ("-t^2^0.5", "-(t**(2**sp.Rational(1,2)))", 1.9, 4),
]
for src, expr, x, m in cases:
    e = sp.sympify(expr, locals={"sp": sp})
    vals = []
    for k in range(m + 1):
        vals.append(sp.N(sp.diff(e, t, k).subs(t, sp.Rational(str(x))), 30))
    print('    {"%s", %r, %d, {%s}},' % (src, x, m, ", ".join("%.17e" % float(v) for v in vals)))
