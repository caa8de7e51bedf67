#include "aplm/aggregator.hpp"

#include <cmath>

#include "aplm/error.hpp"
#include "aplm/parallel.hpp"

namespace aplm {

namespace {

constexpr Eigen::Index kReference = 0;

void check_compatible(std::span<const SubPopFit> fits) {
  if (fits.empty()) throw IncompatibleFitError("no sub-population fits to aggregate");
  const auto& first = fits.front();
  for (const auto& fit : fits) {
    if (!(fit.basis == first.basis)) {
      throw IncompatibleFitError("group '" + fit.group_id + "' was fitted with a different spline basis than group '" +
                                 first.group_id + "'");
    }
    if (fit.d() != first.d()) {
      throw IncompatibleFitError("group '" + fit.group_id + "' has a different number of linear covariates");
    }
  }
}

// Raw coefficients of sum_m alpha_m b*_m where b* is centered with `mu`.
Eigen::VectorXd raw_from_centered(const Eigen::VectorXd& alpha, const Eigen::VectorXd& mu) {
  Eigen::VectorXd theta(mu.size());
  double ref = 0.0;
  Eigen::Index a = 0;
  for (Eigen::Index c = 0; c < mu.size(); ++c) {
    if (c == kReference) continue;
    theta(c) = alpha(a);
    ref -= alpha(a) * mu(c) / mu(kReference);
    ++a;
  }
  theta(kReference) = ref;
  return theta;
}

// Centered coefficients alpha with sum_m alpha_m b*_m == theta' b up to an additive
// constant, using sum_m b_m == 1 and sum_m mu_m == 1.
Eigen::VectorXd centered_from_raw(const Eigen::VectorXd& theta, const Eigen::VectorXd& mu) {
  Eigen::VectorXd delta(theta.size() - 1);
  double shift = 0.0;
  Eigen::Index a = 0;
  for (Eigen::Index c = 0; c < theta.size(); ++c) {
    if (c == kReference) continue;
    delta(a) = theta(c) - theta(kReference);
    shift += delta(a) * mu(c);
    ++a;
  }
  return delta.array() - shift;
}

}  // namespace

std::vector<double> make_weights(std::span<const SubPopFit> fits, WeightMode mode) {
  if (fits.empty()) throw IncompatibleFitError("no sub-population fits to weight");
  std::vector<double> w(fits.size());
  if (mode == WeightMode::uniform) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(fits.size()));
    return w;
  }
  double total = 0.0;
  for (const auto& f : fits) total += static_cast<double>(f.n);
  for (std::size_t j = 0; j < fits.size(); ++j) w[j] = static_cast<double>(fits[j].n) / total;
  return w;
}

Eigen::MatrixXd pooled_basis_means(std::span<const SubPopFit> fits) {
  check_compatible(fits);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(fits.front().basis_means.rows(), fits.front().basis_means.cols());
  double total = 0.0;
  for (const auto& f : fits) {
    sum += static_cast<double>(f.n) * f.basis_means;
    total += static_cast<double>(f.n);
  }
  return sum / total;
}

AggregatedFit aggregate_g(std::span<const SubPopFit> fits, WeightMode mode) {
  check_compatible(fits);
  AggregatedFit agg;
  agg.basis = fits.front().basis;
  agg.weights = make_weights(fits, mode);
  agg.pooled_basis_means = pooled_basis_means(fits);
  for (const auto& f : fits) agg.group_ids.push_back(f.group_id);

  const int K = agg.K();
  const int c = agg.basis.centered_size();
  agg.gbar_gamma.resize(static_cast<Eigen::Index>(K) * c);
  agg.whole_sample_centering.resize(K);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(agg.basis.raw_size());
    for (std::size_t j = 0; j < fits.size(); ++j) theta += agg.weights[j] * fits[j].raw_coefficients(k);
    const Eigen::VectorXd mu = agg.pooled_basis_means.row(k).transpose();
    agg.gbar_gamma.segment(static_cast<Eigen::Index>(k) * c, c) = centered_from_raw(theta, mu);
    agg.whole_sample_centering(k) = mu.dot(agg.raw_coefficients(k));
  }
  return agg;
}

Eigen::VectorXd AggregatedFit::raw_coefficients(int k) const {
  const int c = basis.centered_size();
  return raw_from_centered(gbar_gamma.segment(static_cast<Eigen::Index>(k) * c, c),
                           pooled_basis_means.row(k).transpose());
}

double AggregatedFit::eval_component(int k, double z) const {
  return basis.evaluate(k, z).values.dot(raw_coefficients(k)) - whole_sample_centering(k);
}

Eigen::VectorXd AggregatedFit::component_values(int k, const Eigen::Ref<const Eigen::VectorXd>& z) const {
  return (basis.raw_block(k, z) * raw_coefficients(k)).array() - whole_sample_centering(k);
}

double AggregatedFit::eval(std::span<const double> z) const {
  if (static_cast<int>(z.size()) != K()) throw std::invalid_argument("AggregatedFit::eval: wrong covariate count");
  double total = 0.0;
  for (int k = 0; k < K(); ++k) total += eval_component(k, z[static_cast<std::size_t>(k)]);
  return total;
}

Eigen::VectorXd AggregatedFit::eval_rows(const Eigen::Ref<const Eigen::MatrixXd>& z) const {
  if (z.cols() != K()) throw std::invalid_argument("AggregatedFit::eval_rows: wrong covariate count");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(z.rows());
  for (int k = 0; k < K(); ++k) out += component_values(k, z.col(k));
  return out;
}

Eigen::VectorXd aggregate_beta(std::span<const SubPopFit> fits, WeightMode mode) {
  if (fits.empty()) throw IncompatibleFitError("cannot average beta over an empty fit list");
  check_compatible(fits);
  const auto w = make_weights(fits, mode);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(fits.front().d());
  for (std::size_t j = 0; j < fits.size(); ++j) beta += w[j] * fits[j].beta_hat;
  return beta;
}

Eigen::VectorXd boost_beta(const Partition& data, const AggregatedFit& agg, const SolverOptions& options) {
  if (data.z.cols() != agg.K()) {
    throw IncompatibleFitError("group '" + data.group_id + "' does not match the aggregated basis");
  }
  const Eigen::VectorXd target = data.y - agg.eval_rows(data.z);
  try {
    return solve_ls(data.x, target, options);
  } catch (const SingularDesignError& e) {
    throw SingularDesignError(e.column(), "group '" + data.group_id + "': " + e.what());
  }
}

void boost_all(std::span<const Partition> parts, AggregatedFit& agg, int threads, const SolverOptions& options) {
  std::vector<Eigen::VectorXd> out(parts.size());
  parallel_for(parts.size(), threads, [&](std::size_t j) { out[j] = boost_beta(parts[j], agg, options); });
  agg.beta_breve = std::move(out);
}

}  // namespace aplm
