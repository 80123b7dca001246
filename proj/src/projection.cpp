#include "ccebreak/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ccebreak/error.hpp"

namespace ccebreak {

namespace {

constexpr double kRankTolerance = 1e-10;

Eigen::MatrixXd orthonormal_span(const Eigen::MatrixXd& basis) {
    if (basis.cols() == 0) return Eigen::MatrixXd(basis.rows(), 0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(basis, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    const double sigma_max = sv.size() > 0 ? sv(0) : 0.0;
    const double cutoff = static_cast<double>(std::max(basis.rows(), basis.cols())) *
                          std::numeric_limits<double>::epsilon() * sigma_max;
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > cutoff) ++rank;
    return svd.matrixU().leftCols(rank);
}

}  // namespace

Eigen::MatrixXd cross_sectional_average(const Eigen::MatrixXd& stacked, Eigen::Index n_periods) {
    const Eigen::Index N = stacked.rows() / n_periods;
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(n_periods, stacked.cols());
    for (Eigen::Index i = 0; i < N; ++i) avg += stacked.middleRows(i * n_periods, n_periods);
    return avg / static_cast<double>(N);
}

Eigen::MatrixXd cross_sectional_average(const PanelData& panel) {
    return cross_sectional_average(panel.x(), static_cast<Eigen::Index>(panel.n_periods()));
}

Projector::Projector(Eigen::Index n_periods) : n_periods_(n_periods), q_(n_periods, 0) {}

Projector Projector::annihilator(const Eigen::MatrixXd& basis) {
    if (basis.rows() < 1) throw Error(Errc::invalid_argument, "projector needs T >= 1");
    if (!basis.allFinite()) throw Error(Errc::non_finite_input, "projection basis is not finite");
    Projector p(basis.rows());
    p.q_ = orthonormal_span(basis);
    return p;
}

Eigen::MatrixXd Projector::apply(const Eigen::MatrixXd& a) const {
    if (q_.cols() == 0) return a;
    return a - q_ * (q_.transpose() * a);
}

Eigen::MatrixXd Projector::apply_stacked(const Eigen::MatrixXd& stacked) const {
    Eigen::MatrixXd out = stacked;
    if (q_.cols() == 0) return out;
    const Eigen::Index T = n_periods_;
    const Eigen::Index N = stacked.rows() / T;
    // Column c of a unit-major stack viewed as T x N holds every unit's c-th variable.
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        Eigen::Map<Eigen::MatrixXd> blocks(out.col(c).data(), T, N);
        blocks -= q_ * (q_.transpose() * blocks);
    }
    return out;
}

Eigen::MatrixXd Projector::materialize() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n_periods_, n_periods_);
    if (q_.cols() > 0) m -= q_ * q_.transpose();
    return m;
}

LeastSquares::LeastSquares(const Eigen::MatrixXd& design) : design_(design) {
    if (!design.allFinite()) throw Error(Errc::non_finite_input, "design matrix is not finite");
    scale_ = design.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < scale_.size(); ++j) {
        if (!(scale_(j) > 0.0)) {
            throw Error(Errc::rank_deficient_design,
                        "design column " + std::to_string(j) + " is identically zero");
        }
    }
    Eigen::MatrixXd scaled = design * scale_.cwiseInverse().asDiagonal();
    qr_.setThreshold(kRankTolerance);
    qr_.compute(scaled);
    if (qr_.rank() < design.cols()) {
        throw Error(Errc::rank_deficient_design,
                    "design has numerical rank " + std::to_string(qr_.rank()) + " < " +
                        std::to_string(design.cols()) + " columns");
    }
}

Eigen::MatrixXd LeastSquares::coefficients(const Eigen::MatrixXd& responses) const {
    Eigen::MatrixXd coef = qr_.solve(responses);
    return scale_.cwiseInverse().asDiagonal() * coef;
}

Eigen::MatrixXd LeastSquares::residuals(const Eigen::MatrixXd& responses) const {
    return responses - design_ * coefficients(responses);
}

OlsFit stacked_ols(const Eigen::VectorXd& responses, const Eigen::MatrixXd& regressors) {
    if (responses.size() != regressors.rows()) {
        throw Error(Errc::invalid_argument, "responses and regressors differ in length");
    }
    LeastSquares ls(regressors);
    OlsFit fit;
    fit.coefficients = ls.coefficients(responses);
    fit.residuals = responses - regressors * fit.coefficients;
    fit.ssr = compensated_sum_of_squares(fit.residuals);
    return fit;
}

double compensated_sum_of_squares(std::span<const double> values) {
    double sum = 0.0;
    double comp = 0.0;
    for (double v : values) {
        const double term = v * v;
        const double t = sum + term;
        if (std::abs(sum) >= term) {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    return sum + comp;
}

double largest_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::MatrixXd qa = orthonormal_span(a);
    const Eigen::MatrixXd qb = orthonormal_span(b);
    if (qa.cols() == 0 || qb.cols() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(qa.transpose() * qb);
    const auto& cosines = svd.singularValues();
    const double smallest = std::clamp(cosines(cosines.size() - 1), -1.0, 1.0);
    return std::acos(smallest);
}

}  // namespace ccebreak
