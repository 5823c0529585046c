"""A linear ring gyroscope, two ways.

Without a nonlinearity the shot-noise limit has a closed form. The full
engine (steady state, noise transfer, Fisher information) should land on
the same number once back-scattering is switched off.
"""
from qong import ModelParams, evaluate_point
from qong.sensitivity import linear_mdr_closed_form

p = ModelParams().updated(chi=0.0, beta1=0.0, beta2=0.0, P1=0.945e-6, P2=0.0, Qc1=5e6)

for Qc1 in (2e6, 5e6, 2e7):
    q = p.updated(Qc1=Qc1)
    closed = linear_mdr_closed_form(q)[1]
    engine = evaluate_point(q, convention="classical").mdr_deg_per_hour
    print(f"Qc1 = {Qc1:8.2e}   closed form {closed:9.3f} deg/h   engine {engine:9.3f} deg/h")

# critical coupling (kappa = gamma) is the best a linear ring can do
best = linear_mdr_closed_form(p.updated(Qc1=p.resonator.Qi1))[1]
print(f"critical coupling: {best:.2f} deg/h at 0.945 uW")
