#pragma once
// Central finite-difference checking of analytic gradients (64-bit paths).

#include <cmath>
#include <functional>
#include <string>

#include "ccp/tensor.hpp"

namespace ccp {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst;  // "<label>[i]" of the worst element

    void merge(const GradCheckReport& o) {
        if (o.max_rel_err > max_rel_err) {
            max_rel_err = o.max_rel_err;
            worst = o.worst;
        }
    }
};

inline double rel_err(double analytic, double numeric) {
    double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1.0});
    return std::fabs(analytic - numeric) / denom;
}

// Perturbs every element of `x`, recomputes `loss`, and compares the central
// difference against `analytic`. `loss` must be a pure function of *x.
inline GradCheckReport fd_check(const std::function<double()>& loss, Tensor<double>& x,
                                const Tensor<double>& analytic, const std::string& label,
                                double eps = 1e-5) {
    GradCheckReport rep;
    for (int64_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + eps;
        const double lp = loss();
        x[i] = orig - eps;
        const double lm = loss();
        x[i] = orig;
        const double fd = (lp - lm) / (2 * eps);
        const double re = rel_err(analytic[i], fd);
        if (re > rep.max_rel_err) {
            rep.max_rel_err = re;
            rep.worst = label + "[" + std::to_string(i) + "]";
        }
    }
    return rep;
}

}  // namespace ccp
