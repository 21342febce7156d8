#include "mixmi/linreg.hpp"

#include "mixmi/error.hpp"

#include <algorithm>

namespace mixmi::linreg {

LinearModelParams fit_weighted(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                               const Eigen::VectorXd& weights, double ridge) {
    const auto n = inputs.rows();
    if (n < 1) throw NumericalError("fit_weighted: no rows");
    if (targets.size() != n || weights.size() != n) throw NumericalError("fit_weighted: dimension mismatch");
    if (!inputs.allFinite() || !targets.allFinite() || !weights.allFinite())
        throw NumericalError("fit_weighted: non-finite input");
    if ((weights.array() < 0.0).any()) throw NumericalError("fit_weighted: negative weight");
    const double total = weights.sum();
    if (!(total > 0.0)) throw NumericalError("fit_weighted: weights sum to zero");

    const Eigen::MatrixXd wx = inputs.array().colwise() * weights.array();
    Eigen::MatrixXd gram = inputs.transpose() * wx;
    // Ridge is relative to the mean weight so rescaling all weights is a no-op.
    gram.diagonal().array() += ridge * total / static_cast<double>(n);
    const Eigen::VectorXd rhs = wx.transpose() * targets;

    LinearModelParams out;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    out.beta = ldlt.solve(rhs);
    if (!out.beta.allFinite()) throw NumericalError("fit_weighted: singular normal equations");
    out.sigma2 = std::max(weighted_residual_variance(out, inputs, targets, weights), kVarianceFloor);
    return out;
}

double weighted_residual_variance(const LinearModelParams& model, const Eigen::MatrixXd& inputs,
                                  const Eigen::VectorXd& targets, const Eigen::VectorXd& weights) {
    const Eigen::VectorXd r = targets - inputs * model.beta;
    return (weights.array() * r.array().square()).sum() / weights.sum();
}

Eigen::VectorXd predict(const LinearModelParams& model, const Eigen::MatrixXd& inputs) {
    if (inputs.cols() != model.beta.size()) throw NumericalError("predict: dimension mismatch");
    return inputs * model.beta;
}

}  // namespace mixmi::linreg
