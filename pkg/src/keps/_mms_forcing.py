"""Manufactured solution and its forcing (generated by tools/gen_mms_forcing.py; do not edit)."""

import numpy


def exact_rho(x, y, t):
    return (1/5)*((1/2)*numpy.sin(3*t) + 1)*numpy.cos(numpy.pi*y) + 1 + 0.0 * x * y


def exact_u0(x, y, t):
    return (1/2)*((1/2)*numpy.sin(3*t) + 1)*numpy.sin(numpy.pi*x)*numpy.sin(numpy.pi*y) + 0.0 * x * y


def exact_u1(x, y, t):
    return 0 + 0.0 * x * y


def exact_h(x, y, t):
    return (1/2)*((1/2)*numpy.sin(3*t) + 1)*numpy.sin(numpy.pi*x)*numpy.sin(numpy.pi*y) + 0.0 * x * y


def exact_k(x, y, t):
    return (3/10)*((1/2)*numpy.sin(3*t) + 1)*numpy.cos(numpy.pi*x)*numpy.cos(numpy.pi*y) + 3/2 + 0.0 * x * y


def exact_eps(x, y, t):
    return (1/4)*((1/2)*numpy.sin(3*t) + 1)*numpy.cos(2*numpy.pi*x)*numpy.cos(numpy.pi*y) + 1 + 0.0 * x * y


def forcing_rho(x, y, t, mu, mu_t, mu_e, c1, c2, gamma):
    w0 = 3*t
    w1 = numpy.pi*y
    w2 = numpy.cos(w1)
    w3 = (1/2)*numpy.sin(w0) + 1
    return (3/10)*w2*numpy.cos(w0) + (1/2)*numpy.pi*w3*((1/5)*w2*w3 + 1)*numpy.sin(w1)*numpy.cos(numpy.pi*x) + 0.0 * x * y


def forcing_u0(x, y, t, mu, mu_t, mu_e, c1, c2, gamma):
    w0 = 3*t
    w1 = (1/2)*numpy.sin(w0) + 1
    w2 = numpy.pi*x
    w3 = numpy.sin(w2)
    w4 = numpy.pi*y
    w5 = numpy.sin(w4)
    w6 = w3*w5
    w7 = (1/5)*w1*numpy.cos(w4)
    w8 = w7 + 1
    w9 = numpy.pi*w3*w8
    return (1/4)*w1**2*w5**2*w9*numpy.cos(w2) + (3/2)*numpy.pi**2*w1*w6 + (3/4)*w6*w8*numpy.cos(w0) - w7*w9 + 0.0 * x * y


def forcing_u1(x, y, t, mu, mu_t, mu_e, c1, c2, gamma):
    w0 = numpy.cos(numpy.pi*x)
    w1 = (1/2)*numpy.sin(3*t) + 1
    w2 = numpy.pi*y
    w3 = w1*numpy.cos(w2)
    w4 = w0*w3
    w5 = numpy.pi*w1*numpy.sin(w2)
    w6 = (1/5)*w3 + 1
    w7 = (1/5)*w5
    return -gamma*w6**gamma*w7/w6 - w0*w6*w7 - 1/2*numpy.pi**2*w4 - 2/15*w5*((3/10)*w4 + 3/2) + 0.0 * x * y


def forcing_h(x, y, t, mu, mu_t, mu_e, c1, c2, gamma):
    w0 = 3*t
    w1 = (1/2)*numpy.sin(w0) + 1
    w2 = numpy.pi**2
    w3 = numpy.pi*x
    w4 = numpy.sin(w3)
    w5 = numpy.pi*y
    w6 = numpy.sin(w5)
    w7 = w4*w6
    w8 = numpy.cos(w3)
    w9 = w6**2
    w10 = w1**2
    w11 = w10*w2
    w12 = w11*w9
    w13 = w12*w8**2
    w14 = numpy.cos(w5)
    w15 = (1/5)*w1*w14 + 1
    w16 = numpy.pi*w15*w8
    return -1/25*gamma*mu_t*w12*w15**(gamma - 3) + (1/2)*gamma*w1*w15**(gamma - 1)*w16*w6 + (1/6)*mu*w13 - mu*((1/4)*w11*w14**2*w4**2 + (1/2)*w13) + w1*w2*w7 + (1/4)*w10*w16*w4*w9 + (3/4)*w15*w7*numpy.cos(w0) + 0.0 * x * y


def forcing_k(x, y, t, mu, mu_t, mu_e, c1, c2, gamma):
    w0 = numpy.pi**2
    w1 = numpy.pi*x
    w2 = numpy.cos(w1)
    w3 = 3*t
    w4 = (1/2)*numpy.sin(w3) + 1
    w5 = numpy.pi*y
    w6 = numpy.cos(w5)
    w7 = w4*w6
    w8 = w2*w7
    w9 = (1/5)*w7 + 1
    w10 = w6*w9
    w11 = w4**2
    w12 = numpy.sin(w1)**2
    w13 = numpy.sin(w5)
    w14 = numpy.pi*w13
    w15 = w0*w11
    w16 = w14*w2*w4
    return -mu_e*((1/4)*w12*w15*w6**2 + (1/2)*w13**2*w15*w2**2) + (3/5)*w0*w8 - 3/20*w10*w11*w12*w14 + (9/20)*w10*w2*numpy.cos(w3) + (1/2)*w16*((1/3)*mu_e*w16 + (2/3)*w9*((3/10)*w8 + 3/2)) + w9*((1/4)*w7*numpy.cos(2*w1) + 1) + 0.0 * x * y


def forcing_eps(x, y, t, mu, mu_t, mu_e, c1, c2, gamma):
    w0 = numpy.pi**2
    w1 = numpy.pi*x
    w2 = 2*w1
    w3 = numpy.cos(w2)
    w4 = 3*t
    w5 = (1/2)*numpy.sin(w4) + 1
    w6 = numpy.pi*y
    w7 = numpy.cos(w6)
    w8 = w5*w7
    w9 = w3*w8
    w10 = (1/5)*w8 + 1
    w11 = w10*w7
    w12 = w5**2
    w13 = numpy.sin(w1)
    w14 = numpy.sin(w6)
    w15 = numpy.pi*w14
    w16 = numpy.cos(w1)
    w17 = (3/10)*w16*w8 + 3/2
    w18 = w17**(-1.0)
    w19 = (1/4)*w9 + 1
    w20 = w0*w12
    w21 = w15*w16*w5
    return -c1*w18*w19*(mu_e*((1/4)*w13**2*w20*w7**2 + (1/2)*w14**2*w16**2*w20) - 1/2*w21*((1/3)*mu_e*w21 + (2/3)*w10*w17)) + c2*w10*w18*w19**2 + (5/4)*w0*w9 - 1/4*w11*w12*w13*w15*numpy.sin(w2) + (3/8)*w11*w3*numpy.cos(w4) + 0.0 * x * y
