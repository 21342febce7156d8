#pragma once

#include "mixmi/gp.hpp"
#include "mixmi/linreg.hpp"
#include "mixmi/tensor.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mixmi::mixture {

/// The three base models a mixture can draw from.
enum class ComponentKind { Cross, Temporal, Gp };

/// Which components a mixture carries. `Full` and `LinearLinear` are the two
/// shipped variants; the single-component kinds exist for ablations.
enum class ModelKind { Full, LinearLinear, CrossOnly, TemporalOnly, GpOnly };

std::vector<ComponentKind> components_of(ModelKind kind);
std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

enum class CovarianceMode { Full, Diagonal, Auto };

struct EmSettings {
    int max_iters = 100;
    double rel_tol = 1e-6;
    /// Iteration budget of the single theta ascent call made per M-step.
    int theta_iters = 5;
    CovarianceMode covariance = CovarianceMode::Auto;
};

inline constexpr double kCovRidge = 1e-6;
inline constexpr double kEmptyComponent = 1e-12;

struct GaussianParams {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Every trainable parameter of one (v, b) mixture.
struct MixtureParams {
    ModelKind kind = ModelKind::Full;
    std::vector<ComponentKind> components;
    Eigen::VectorXd pi;
    std::vector<GaussianParams> gauss;  ///< one per component, over V-space
    linreg::LinearModelParams cross;
    linreg::LinearModelParams temporal;
    gp::KernelParams kernel;
    bool diagonal = false;

    std::size_t size() const { return components.size(); }
    bool has(ComponentKind c) const;
};

/// A fiber slice with the per-patient GP series and V-space rows precomputed.
struct PreparedSlice {
    FiberSlice slice;
    Eigen::MatrixXd rows;
    std::vector<gp::Series> series;
    std::vector<unsigned char> gp_usable;
    bool any_gp_usable = false;

    std::size_t size() const { return slice.rows(); }
};

PreparedSlice prepare(FiberSlice slice);

/// Row-stochastic soft assignments of training patients to components.
struct Responsibilities {
    Eigen::MatrixXd w;
    double loglik = 0.0;         ///< sum over non-degenerate rows of ln sum_k exp(score_k)
    std::size_t degenerate = 0;  ///< rows whose every score was -inf (set uniform)
};

/// Empirical moments for every Gaussian, unweighted linear fits, theta = 1.
/// Throws UntrainableError for an empty slice, or when a GP component is
/// requested and no patient has a usable series.
MixtureParams init_params(const PreparedSlice& data, ModelKind kind, const Eigen::VectorXd& pi0,
                          const EmSettings& settings = {});

/// ln p(x_p | component k), one column per component; -inf where unavailable.
Eigen::MatrixXd target_log_densities(const MixtureParams& params, const PreparedSlice& data);

Responsibilities e_step(const MixtureParams& params, const PreparedSlice& data);

MixtureParams m_step(const MixtureParams& params, const PreparedSlice& data, const Responsibilities& resp,
                     const EmSettings& settings = {});

struct FitResult {
    MixtureParams params;
    double loglik = 0.0;
    std::vector<double> trace;  ///< log-likelihood at initialization and after every M-step
    int iterations = 0;
};

/// Generalized EM. Returns the iterate with the highest log-likelihood.
FitResult fit_em(const PreparedSlice& data, ModelKind kind, const Eigen::VectorXd& pi0,
                 const EmSettings& settings = {});

/// Input-only mixing weights: Pi_pk proportional to pi_k N(V_p | mu_k, Sigma_k).
Eigen::MatrixXd individualized_weights(const MixtureParams& params, const Eigen::MatrixXd& rows);

/// Predictive mean of each component per row; NaN where the GP cannot predict.
Eigen::MatrixXd component_means(const MixtureParams& params, const PreparedSlice& data);

struct Imputation {
    Eigen::VectorXd values;
    Eigen::MatrixXd weights;  ///< the weight rows actually used, after renormalization
};

/// Convex combination of the component means with each patient's weight row
/// (individualized, or the fitted pi when `fixed_weights` is set).
Imputation impute_fiber(const MixtureParams& params, const PreparedSlice& data, bool fixed_weights = false);

/// Mean absolute error of impute_fiber on the training rows themselves.
double training_abs_error(const MixtureParams& params, const PreparedSlice& data, bool fixed_weights = false);

struct Candidate {
    MixtureParams params;
    double error = 0.0;
};

/// Lower training error wins; an exact tie goes to the two-linear variant.
const MixtureParams& select_model(const Candidate& full, const Candidate& ll);

}  // namespace mixmi::mixture
