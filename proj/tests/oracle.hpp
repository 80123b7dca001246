#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ccebreak/panel.hpp"

namespace oracle {

struct Fit {
    Eigen::VectorXd beta;
    Eigen::VectorXd delta;
    double ssr = 0.0;
    int residual_dof = 0;  ///< NT minus the rank of the augmented design
    bool solvable = false;  ///< every slope coefficient is identified
};

/**
 * Joint stacked OLS of y on (X, Z(b), I_N (x) H) by explicit normal equations in long double.
 * H = (D, Xbar) when testing is false, else (D, D(b), Xbar, Zbar(b)). Knows nothing about the
 * library's projectors; everything is rebuilt from the raw arrays.
 */
Fit augmented_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Eigen::MatrixXd& d,
                  const std::vector<std::size_t>& breaking, int b, bool testing, int n_units, int n_periods);

inline Fit augmented_fit(const ccebreak::PanelData& p, const std::vector<std::size_t>& breaking, int b,
                         bool testing) {
    return augmented_fit(p.y(), p.x(), p.d(), breaking, b, testing, static_cast<int>(p.n_units()),
                         static_cast<int>(p.n_periods()));
}

/// Random Gaussian panel with an intercept plus n_known - 1 common regressors.
ccebreak::PanelData random_panel(int n_units, int n_periods, int k, int n_known, std::uint64_t seed,
                                 double factor_strength = 1.0);

double relative_error(double a, double b);
double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace oracle
