#pragma once

#include "stefan/model.hpp"

#include <cmath>
#include <random>

namespace fixtures {

inline stefan::PhysicalParams zinc(double eps = 20.0)
{
    return {4.532994140323523e-05, 1.5769787851627015e-07, 116.0, 693.15, 0.5, eps, std::nullopt};
}

inline stefan::PhysicalParams zinc3(double eps1 = 10.0, double eps2 = 10.0)
{
    auto p = zinc(eps1);
    p.eps2 = eps2;
    return p;
}

inline stefan::InitialData melt(double surplus = 10.0, double s0 = 0.1, double v0 = 0.0)
{
    return {s0, v0, std::nullopt, stefan::LinearProfile{surplus}};
}

// Reference trapezoid on an independent fine grid, evaluated directly from the
// profile function rather than through the library's quadrature helper.
template <class F>
double fine_trapezoid(F f, double a, double b, int n)
{
    const double h = (b - a) / n;
    double sum = 0.5 * (f(a) + f(b));
    for (int i = 1; i < n; ++i) {
        sum += f(a + i * h);
    }
    return sum * h;
}

inline std::mt19937_64& rng()
{
    static std::mt19937_64 gen(20240611);
    return gen;
}

inline double uniform(double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng());
}

inline double log_uniform(double lo, double hi)
{
    return std::exp(uniform(std::log(lo), std::log(hi)));
}

} // namespace fixtures
