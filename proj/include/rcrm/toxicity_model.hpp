#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcrm {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Power model P(DLT | d) = p_d^exp(alpha) with a normal prior on alpha.
// Doses are 1-based throughout the public API.
struct ModelConfig {
  std::vector<double> skeleton{0.01, 0.05, 0.10, 0.18, 0.30, 0.50};
  double target = 0.30;
  double prior_mean = 0.0;
  double prior_sd = 2.0;
  double grid_lo = -10.0;
  double grid_hi = 10.0;
  int grid_points = 2001;

  int doses() const { return static_cast<int>(skeleton.size()); }

  // Throws ConfigError naming the first violated invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Per-dose tallies of subjects treated and DLTs observed.
class ObservationSet {
 public:
  explicit ObservationSet(int doses);

  void add(int dose, int subjects, int dlts);

  int doses() const { return static_cast<int>(subjects_.size()); }
  int subjects(int dose) const;
  int dlts(int dose) const;
  int total_subjects() const;
  bool empty() const { return total_subjects() == 0; }

  bool operator==(const ObservationSet&) const = default;

 private:
  std::vector<int> subjects_;
  std::vector<int> dlts_;
};

// The summaries the designs consume. All vectors are indexed by dose - 1.
struct PosteriorSummary {
  std::vector<double> dose_means;
  std::vector<double> mtd_probs;
  double p_overtoxic = 0.0;

  bool operator==(const PosteriorSummary&) const = default;
};

struct Posterior : PosteriorSummary {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Index (0-based) of the entry closest to `target`, ties to the lower index.
///
/// `probs` must be nondecreasing. The comparison brackets the target instead
/// of comparing every |p - target|: once all p are far below the target in
/// floating point those distances all round to `target` itself.
std::size_t closest_to_target(std::span<const double> probs, double target);

/// Posterior engine for one ModelConfig.
///
/// Integration uses composite 3-point Gauss-Legendre panels spanning the
/// configured node grid. Panels are additionally split where mtd_index(alpha)
/// changes and at the overtoxicity threshold, so every indicator the summaries
/// integrate is constant inside a panel.
class ToxicityModel {
 public:
  explicit ToxicityModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  int doses() const { return config_.doses(); }

  double dlt_probability(double alpha, int dose) const;
  double log_likelihood(double alpha, const ObservationSet& obs) const;
  int mtd_index(double alpha) const;

  /// alpha below which theta(1) exceeds the target.
  double overtoxicity_threshold() const { return overtox_cut_; }
  /// Interior alphas where mtd_index changes value, ascending.
  const std::vector<double>& mtd_switch_points() const { return mtd_cuts_; }

  Posterior posterior(const ObservationSet& obs) const;
  PosteriorSummary summarize(const ObservationSet& obs) const;

  std::size_t quadrature_size() const { return nodes_.size(); }

 private:
  void normalized_weights(const ObservationSet& obs, std::vector<double>& w) const;
  PosteriorSummary summarize_weights(std::span<const double> w) const;

  ModelConfig config_;
  std::vector<double> log_skeleton_;
  double overtox_cut_;
  std::vector<double> mtd_cuts_;

  // Per quadrature point; per-dose tables are row-major [point][dose].
  std::vector<double> nodes_;
  std::vector<double> log_base_;    // log quadrature weight + log prior density
  std::vector<double> log_tox_;     // log theta(d; alpha)
  std::vector<double> log_nontox_;  // log(1 - theta(d; alpha))
  std::vector<double> tox_;         // theta(d; alpha)
  std::vector<int> mtd_class_;      // mtd_index(alpha) - 1
  std::vector<char> overtoxic_;     // theta(1; alpha) > target
};

// Free-function forms; each builds a ToxicityModel from `config`.
double dlt_probability(double alpha, int dose, const ModelConfig& config);
double log_likelihood(double alpha, const ObservationSet& obs, const ModelConfig& config);
Posterior compute_posterior(const ObservationSet& obs, const ModelConfig& config);
int mtd_index(double alpha, const ModelConfig& config);

std::vector<double> mtd_probabilities(std::span<const double> nodes,
                                      std::span<const double> weights,
                                      const ModelConfig& config);
double overtoxicity_probability(std::span<const double> nodes,
                                std::span<const double> weights,
                                const ModelConfig& config);

}  // namespace rcrm
