#pragma once

#include "eimnet/lti.hpp"

#include <cmath>
#include <random>
#include <string>

namespace testutil {

using eimnet::cplx;
using eimnet::CMatrix;

inline double rel_err(const CMatrix& a, const CMatrix& b) {
    const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline double rel_err(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline CMatrix random_matrix(std::mt19937& rng, int rows, int cols) {
    std::normal_distribution<double> n;
    CMatrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = cplx(n(rng), n(rng));
    return m;
}

/// A point in the right half of the s plane away from the origin.
inline cplx random_s(std::mt19937& rng) {
    std::uniform_real_distribution<double> re(-5.0, 5.0), im(1.0, 3000.0);
    return {re(rng), im(rng)};
}

}  // namespace testutil

#include "eimnet/converter_eim.hpp"

namespace testutil {

/// 500 MVA, 220 kV, 400 kV converter with a 0.15 pu filter.
inline eimnet::ConverterSpec base_spec(const std::string& name) {
    eimnet::ConverterSpec s;
    s.name = name;
    s.omega1 = 2.0 * 3.141592653589793 * 50.0;
    s.base = {500e6, 220e3 * std::sqrt(2.0 / 3.0), 400e3, s.omega1};
    const double zb = s.base.z_ac();
    s.r_f = 0.005 * zb;
    s.l_f = 0.15 * zb / s.omega1;
    s.delay = 100e-6;
    const double a = 2.0 * 3.141592653589793 * 300.0;
    s.current = {a * s.l_f, a * s.r_f};
    s.decoupling = s.omega1 * s.l_f;
    return s;
}

inline eimnet::ConverterSpec gfl_spec() {
    eimnet::ConverterSpec s = base_spec("gfl");
    eimnet::GflControl g;
    const double u = s.base.v_ac, wn = 2.0 * 3.141592653589793 * 20.0;
    g.pll = {2.0 * 0.707 * wn / u, wn * wn / u};
    g.dc = {2.0 * s.base.i_ac() / s.base.v_dc, 40.0 * s.base.i_ac() / s.base.v_dc};
    g.pq = {0.2 * s.base.i_ac() / s.base.s, 20.0 * s.base.i_ac() / s.base.s};
    s.control = g;
    return s;
}

inline eimnet::ConverterSpec gfm_spec() {
    eimnet::ConverterSpec s = base_spec("gfm");
    eimnet::GfmControl g;
    g.inertia = 1.0;
    g.damping = 10.0;
    g.r_vir = 0.02 * s.base.z_ac();
    g.l_vir = 0.3 * s.base.z_ac() / s.omega1;
    s.control = g;
    return s;
}

inline eimnet::OperatingPoint nominal_op(const eimnet::ConverterSpec& s, double p_pu) {
    eimnet::TerminalConditions tc;
    tc.u_mag = s.base.v_ac;
    tc.p = p_pu * s.base.s;
    tc.v_dc = s.base.v_dc;
    return eimnet::solve_operating_point(s, tc);
}

}  // namespace testutil
