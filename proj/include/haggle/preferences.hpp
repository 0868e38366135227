#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "haggle/bundle.hpp"
#include "haggle/rng.hpp"

namespace haggle {

/// Index layout of the cubic-polynomial coefficient vector: the constant
/// term, then linear terms, then quadratic terms for i<j, then cubic terms
/// for i<j<k. Each coefficient is identified by the bit mask of its index
/// tuple (the constant term has mask 0). Diagonal terms (a_ii, a_iii) do
/// not exist in this layout.
struct CoefficientLayout {
  int n = 0;
  std::vector<std::uint32_t> masks;  // masks[j] = index tuple of coefficient j
  std::vector<int> orders;           // popcount of the tuple, 0..3

  explicit CoefficientLayout(int catalog_size) : n(catalog_size) {
    masks.push_back(0);
    orders.push_back(0);
    for (int i = 0; i < n; ++i) {
      masks.push_back(1u << i);
      orders.push_back(1);
    }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        masks.push_back((1u << i) | (1u << j));
        orders.push_back(2);
      }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
          masks.push_back((1u << i) | (1u << j) | (1u << k));
          orders.push_back(3);
        }
  }

  int dim() const { return static_cast<int>(masks.size()); }
};

/// The 0/1 matrix mapping a coefficient vector to the vector of all bundle
/// valuations: row b has a 1 exactly at coefficients whose index tuple is a
/// subset of b (the constant column is all ones). Rows are indexed by
/// all_bundles(n), i.e. row (bits - 1) belongs to the bundle with that bit
/// value.
inline Eigen::MatrixXd build_transform(const CoefficientLayout& layout) {
  const int n = layout.n;
  const int rows = (1 << n) - 1;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(rows, layout.dim());
  for (int r = 0; r < rows; ++r) {
    const std::uint32_t bits = static_cast<std::uint32_t>(r) + 1;
    for (int j = 0; j < layout.dim(); ++j)
      if ((layout.masks[j] & bits) == layout.masks[j]) t(r, j) = 1.0;
  }
  return t;
}

inline Eigen::MatrixXd build_transform(int n) {
  return build_transform(CoefficientLayout(n));
}

/// One customer's realized valuation table over all 2^n - 1 bundles.
class CustomerValuation {
 public:
  CustomerValuation(std::vector<double> values, int n)
      : values_(std::move(values)), n_(n) {
    if (values_.size() != (1u << n_) - 1)
      throw std::invalid_argument("CustomerValuation: wrong table length");
  }

  double value(const Bundle& b) const { return values_[b.bits() - 1]; }
  int catalog_size() const { return n_; }
  const std::vector<double>& table() const { return values_; }

 private:
  std::vector<double> values_;
  int n_;
};

/// Shop-side valuation: additive unit costs minus a size-indexed bundle
/// discount, zero for bundles of more than 3 goods.
class ShopValuation {
 public:
  ShopValuation(std::vector<double> unit_costs, std::vector<double> discount_by_size)
      : unit_costs_(std::move(unit_costs)) {
    const int n = static_cast<int>(unit_costs_.size());
    if (n < 1 || n > kMaxCatalogSize)
      throw std::invalid_argument("ShopValuation: bad catalog size");
    for (double c : unit_costs_)
      if (c <= 0.0) throw std::invalid_argument("ShopValuation: unit cost must be positive");
    discount_.assign(n + 1, 0.0);
    for (std::size_t k = 0; k < discount_by_size.size() && k <= static_cast<std::size_t>(n); ++k)
      discount_[k] = discount_by_size[k];
    std::vector<double> sorted = unit_costs_;
    std::sort(sorted.begin(), sorted.end());
    double cheapest = 0.0;
    for (int k = 1; k <= n; ++k) {
      cheapest += sorted[k - 1];
      if (k > 3 && discount_[k] != 0.0)
        throw std::invalid_argument("ShopValuation: discount must be 0 above size 3");
      if (discount_[k] < 0.0 || discount_[k] >= cheapest)
        throw std::invalid_argument("ShopValuation: discount out of range");
    }
  }

  int catalog_size() const { return static_cast<int>(unit_costs_.size()); }
  const std::vector<double>& unit_costs() const { return unit_costs_; }
  double discount(int size) const { return discount_[size]; }

  double value(const Bundle& b) const {
    double sum = 0.0;
    for (int i = 0; i < catalog_size(); ++i)
      if (b.contains(i)) sum += unit_costs_[i];
    return sum - discount_[b.size()];
  }

 private:
  std::vector<double> unit_costs_;
  std::vector<double> discount_;  // indexed by bundle size
};

inline double gains(const CustomerValuation& cv, const ShopValuation& sv,
                    const Bundle& b) {
  return cv.value(b) - sv.value(b);
}

struct BestBundles {
  std::vector<Bundle> best;  // argmax set, ascending bundle order
  double max_gains = 0.0;
  double min_gains = 0.0;
};

/// Exhaustive scan over all 2^n - 1 bundles. Ties are all included.
inline BestBundles best_bundles(const CustomerValuation& cv, const ShopValuation& sv) {
  BestBundles out;
  const int n = cv.catalog_size();
  bool first = true;
  for (std::uint32_t bits = 1; bits < (1u << n); ++bits) {
    Bundle b(bits, n);
    const double g = gains(cv, sv, b);
    if (first || g > out.max_gains) {
      out.max_gains = g;
      out.best.clear();
      out.best.push_back(b);
    } else if (g == out.max_gains) {
      out.best.push_back(b);
    }
    if (first || g < out.min_gains) out.min_gains = g;
    first = false;
  }
  return out;
}

/// Generation knobs for the random preference distributions. The catalog is
/// partitioned into 3 blocks of complementary goods; coefficients whose index
/// tuple falls inside one block get positive complementarity means and high
/// mutual correlation, tuples spanning blocks get negative means and weak
/// correlation.
struct PopulationParams {
  std::vector<std::uint32_t> partition_masks;  // empty = default 3-way split

  double linear_mean_lo = 100.0, linear_mean_hi = 300.0;
  double cross_mean_lo = -300.0, cross_mean_hi = -100.0;
  double std_lo = 20.0, std_hi = 40.0;
  double a0_std = 10.0;
  // magnitude scale per polynomial order (linear : quadratic : cubic)
  double quad_scale = 0.3;
  double cubic_scale = 0.1;

  double within_corr_lo = 0.85, within_corr_hi = 0.95;
  double cross_corr_lo = -0.2, cross_corr_hi = 0.2;

  static std::vector<std::uint32_t> default_partition(int n) {
    // 3 blocks of near-equal size; n=10 gives sizes 3, 3, 4
    std::vector<std::uint32_t> blocks(3, 0);
    const int base = n / 3;
    int good = 0;
    for (int blk = 0; blk < 3; ++blk) {
      int size = base + (blk >= 3 - n % 3 ? 1 : 0);
      for (int k = 0; k < size; ++k) blocks[blk] |= 1u << good++;
    }
    return blocks;
  }
};

/// The multivariate-normal model over polynomial coefficients, together with
/// the transform to bundle-valuation space. Immutable once built; sampling
/// takes an explicit generator.
class PreferencePopulation {
 public:
  PreferencePopulation(CoefficientLayout layout, Eigen::VectorXd mu,
                       Eigen::MatrixXd sigma, Eigen::MatrixXd corr,
                       std::vector<std::uint32_t> partition_masks)
      : layout_(std::move(layout)),
        mu_(std::move(mu)),
        sigma_(std::move(sigma)),
        corr_(std::move(corr)),
        partition_(std::move(partition_masks)),
        transform_(build_transform(layout_)) {
    if (mu_.size() != layout_.dim() || sigma_.rows() != layout_.dim() ||
        sigma_.cols() != layout_.dim())
      throw std::invalid_argument("PreferencePopulation: dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_);
    Eigen::VectorXd evals = es.eigenvalues().cwiseMax(0.0);
    factor_ = es.eigenvectors() * evals.cwiseSqrt().asDiagonal();
    value_means_ = transform_ * mu_;
  }

  int catalog_size() const { return layout_.n; }
  const CoefficientLayout& layout() const { return layout_; }
  const Eigen::VectorXd& mu() const { return mu_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }
  const Eigen::MatrixXd& corr() const { return corr_; }
  const Eigen::MatrixXd& transform() const { return transform_; }
  const std::vector<std::uint32_t>& partition() const { return partition_; }

  /// (T mu)(b): the population-mean valuation of bundle b.
  double value_mean(const Bundle& b) const { return value_means_[b.bits() - 1]; }

  /// Row of T for bundle b, as a dense vector.
  Eigen::VectorXd transform_row(const Bundle& b) const {
    return transform_.row(b.bits() - 1).transpose();
  }

  /// cov(v(a), v(b)) = t_a' Sigma t_b under the transformed distribution.
  double value_cov(const Bundle& a, const Bundle& b) const {
    return (transform_.row(a.bits() - 1) * sigma_ *
            transform_.row(b.bits() - 1).transpose())
        .value();
  }

  Eigen::VectorXd sample_coefficients(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(layout_.dim());
    for (int i = 0; i < z.size(); ++i) z[i] = normal(rng);
    return mu_ + factor_ * z;
  }

 private:
  CoefficientLayout layout_;
  Eigen::VectorXd mu_;
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd corr_;
  std::vector<std::uint32_t> partition_;
  Eigen::MatrixXd transform_;
  Eigen::MatrixXd factor_;  // A with A A' = Sigma (eigenvalue square root)
  Eigen::VectorXd value_means_;
};

namespace detail {

/// Nearest-PSD repair: clip negative eigenvalues at zero, then renormalize
/// the diagonal back to 1.
inline Eigen::MatrixXd repair_correlation(const Eigen::MatrixXd& corr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
  if (es.eigenvalues().minCoeff() >= 0.0) return corr;
  Eigen::VectorXd evals = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd repaired =
      es.eigenvectors() * evals.asDiagonal() * es.eigenvectors().transpose();
  Eigen::VectorXd d = repaired.diagonal().cwiseMax(1e-12).cwiseSqrt();
  for (int i = 0; i < repaired.rows(); ++i)
    for (int j = 0; j < repaired.cols(); ++j) repaired(i, j) /= d[i] * d[j];
  return repaired;
}

inline int block_of(std::uint32_t mask, const std::vector<std::uint32_t>& blocks) {
  if (mask == 0) return -1;
  for (std::size_t k = 0; k < blocks.size(); ++k)
    if ((mask & blocks[k]) == mask) return static_cast<int>(k);
  return -1;
}

}  // namespace detail

/// Randomly generates one preference distribution honoring the partition
/// structure: a fixed correlation matrix with high positive correlation
/// inside each partition block, and coefficient means that make the
/// partition bundles attractive relative to their surroundings.
inline PreferencePopulation sample_population(int n, std::uint64_t seed,
                                              const PopulationParams& params = {}) {
  if (n < 1 || n > kMaxCatalogSize)
    throw std::invalid_argument("sample_population: catalog size out of range");
  std::vector<std::uint32_t> blocks = params.partition_masks;
  if (blocks.empty()) blocks = PopulationParams::default_partition(n);
  std::uint32_t covered = 0;
  for (std::uint32_t b : blocks) {
    if (b == 0 || (covered & b))
      throw std::invalid_argument("sample_population: partition blocks must be disjoint and nonempty");
    covered |= b;
  }
  if (covered != (1u << n) - 1)
    throw std::invalid_argument("sample_population: partition must cover the catalog");

  CoefficientLayout layout(n);
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const int dim = layout.dim();
  Eigen::VectorXd mu(dim);
  Eigen::VectorXd stds(dim);
  std::vector<int> block_id(dim);
  for (int j = 0; j < dim; ++j) {
    const int order = layout.orders[j];
    block_id[j] = detail::block_of(layout.masks[j], blocks);
    double scale = order == 2 ? params.quad_scale : order == 3 ? params.cubic_scale : 1.0;
    if (order == 0) {
      mu[j] = 0.0;
      stds[j] = params.a0_std;
    } else if (order == 1 || block_id[j] >= 0) {
      mu[j] = scale * uniform(params.linear_mean_lo, params.linear_mean_hi);
      stds[j] = scale * uniform(params.std_lo, params.std_hi);
    } else {
      // complementarity spanning partition blocks: negative on average
      mu[j] = scale * uniform(params.cross_mean_lo, params.cross_mean_hi);
      stds[j] = scale * uniform(params.std_lo, params.std_hi);
    }
  }

  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      double c;
      if (block_id[i] >= 0 && block_id[i] == block_id[j])
        c = uniform(params.within_corr_lo, params.within_corr_hi);
      else
        c = uniform(params.cross_corr_lo, params.cross_corr_hi);
      corr(i, j) = corr(j, i) = c;
    }
  corr = detail::repair_correlation(corr);

  Eigen::MatrixXd sigma = stds.asDiagonal() * corr * stds.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> check(sigma);
  if (check.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, sigma.diagonal().maxCoeff()))
    return sample_population(n, mix64(seed), params);  // retry with a new draw

  return PreferencePopulation(std::move(layout), std::move(mu), std::move(sigma),
                              std::move(corr), std::move(blocks));
}

inline CustomerValuation sample_customer(const PreferencePopulation& pop, Rng& rng) {
  Eigen::VectorXd a = pop.sample_coefficients(rng);
  Eigen::VectorXd v = pop.transform() * a;
  return CustomerValuation(std::vector<double>(v.data(), v.data() + v.size()),
                           pop.catalog_size());
}

struct ShopParams {
  double cost_lo = 80.0, cost_hi = 160.0;
  double discount2 = 20.0, discount3 = 40.0;
};

inline ShopValuation sample_shop(int n, std::uint64_t seed, const ShopParams& params = {}) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> cost(params.cost_lo, params.cost_hi);
  std::vector<double> costs(n);
  for (double& c : costs) c = cost(rng);
  std::vector<double> discount(std::min(n, 3) + 1, 0.0);
  if (n >= 2) discount[2] = params.discount2;
  if (n >= 3) discount[3] = params.discount3;
  return ShopValuation(std::move(costs), std::move(discount));
}

}  // namespace haggle
