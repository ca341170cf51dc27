#include "rcrm/toxicity_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace rcrm {

namespace {

void check_dose(int dose, int doses) {
  if (dose < 1 || dose > doses) {
    throw std::out_of_range("dose " + std::to_string(dose) + " outside [1, " +
                            std::to_string(doses) + "]");
  }
}

// log(1 - exp(x)) for x <= 0, accurate at both ends.
double log1m_exp(double x) { return std::log(-std::expm1(x)); }

// Dose closest to the target given log theta per dose (strictly increasing).
// Bracketing on the log scale stays exact when every theta underflows to 0.
std::size_t closest_from_log(std::span<const double> log_theta, double target) {
  const auto above =
      static_cast<std::size_t>(std::lower_bound(log_theta.begin(), log_theta.end(), std::log(target)) -
                               log_theta.begin());
  if (above == 0) return 0;
  if (above == log_theta.size()) return above - 1;
  const std::size_t below = above - 1;
  return (target - std::exp(log_theta[below]) <= std::exp(log_theta[above]) - target) ? below : above;
}

// Finds the alphas in (lo, hi] where a nondecreasing step function changes.
template <class F>
void find_switches(double lo, double hi, int at_lo, int at_hi, const F& index_at,
                   std::vector<double>& out) {
  if (at_lo == at_hi) return;
  const double mid = lo + 0.5 * (hi - lo);
  if (mid <= lo || mid >= hi) {
    out.push_back(hi);
    return;
  }
  const int at_mid = index_at(mid);
  find_switches(lo, mid, at_lo, at_mid, index_at, out);
  find_switches(mid, hi, at_mid, at_hi, index_at, out);
}

}  // namespace

void ModelConfig::validate() const {
  if (skeleton.empty()) throw ConfigError("skeleton must not be empty");
  for (std::size_t i = 0; i < skeleton.size(); ++i) {
    const double p = skeleton[i];
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("skeleton values must lie in (0, 1)");
    if (i > 0 && !(p > skeleton[i - 1])) {
      throw ConfigError("skeleton must be strictly increasing");
    }
  }
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("target must lie in (0, 1)");
  if (!std::isfinite(prior_mean)) throw ConfigError("prior_mean must be finite");
  if (!(prior_sd > 0.0) || !std::isfinite(prior_sd)) {
    throw ConfigError("prior_sd must be positive");
  }
  if (!(grid_lo < grid_hi) || !std::isfinite(grid_lo) || !std::isfinite(grid_hi)) {
    throw ConfigError("grid_lo must be less than grid_hi");
  }
  if (grid_points < 3 || grid_points % 2 == 0) {
    throw ConfigError("grid_points must be odd and at least 3");
  }
}

ObservationSet::ObservationSet(int doses)
    : subjects_(static_cast<std::size_t>(std::max(doses, 0)), 0),
      dlts_(static_cast<std::size_t>(std::max(doses, 0)), 0) {
  if (doses < 1) throw ConfigError("observation set needs at least one dose");
}

void ObservationSet::add(int dose, int subjects, int dlts) {
  check_dose(dose, doses());
  if (subjects < 0 || dlts < 0 || dlts > subjects) {
    throw std::invalid_argument("observations need 0 <= dlts <= subjects");
  }
  subjects_[dose - 1] += subjects;
  dlts_[dose - 1] += dlts;
}

int ObservationSet::subjects(int dose) const {
  check_dose(dose, doses());
  return subjects_[dose - 1];
}

int ObservationSet::dlts(int dose) const {
  check_dose(dose, doses());
  return dlts_[dose - 1];
}

int ObservationSet::total_subjects() const {
  int total = 0;
  for (int n : subjects_) total += n;
  return total;
}

std::size_t closest_to_target(std::span<const double> probs, double target) {
  if (probs.empty()) throw std::invalid_argument("closest_to_target: empty sequence");
  const auto first_at_or_above = std::lower_bound(probs.begin(), probs.end(), target);
  const auto first_equal = [&](std::size_t i) {
    return static_cast<std::size_t>(
        std::lower_bound(probs.begin(), probs.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                         probs[i]) -
        probs.begin());
  };
  const auto above = static_cast<std::size_t>(first_at_or_above - probs.begin());
  if (above == 0) return 0;
  const std::size_t below = first_equal(above - 1);
  if (above == probs.size()) return below;
  return (target - probs[below] <= probs[above] - target) ? below : above;
}

ToxicityModel::ToxicityModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const int doses = config_.doses();
  log_skeleton_.reserve(config_.skeleton.size());
  for (double p : config_.skeleton) log_skeleton_.push_back(std::log(p));

  // theta(1; a) > target  <=>  a < ln(ln target / ln p_1)
  overtox_cut_ = std::log(std::log(config_.target) / log_skeleton_.front());

  const double lo = config_.grid_lo;
  const double hi = config_.grid_hi;
  const int panels = config_.grid_points - 1;
  const double step = (hi - lo) / panels;
  std::vector<double> edges;
  edges.reserve(static_cast<std::size_t>(config_.grid_points) + doses + 1);
  for (int i = 0; i <= panels; ++i) edges.push_back(i == panels ? hi : lo + i * step);

  const auto index_at = [this](double a) { return mtd_index(a); };
  for (int i = 0; i < panels; ++i) {
    const double a = edges[i];
    const double b = edges[i + 1];
    find_switches(a, b, index_at(a), index_at(b), index_at, mtd_cuts_);
  }
  std::vector<double> cuts = mtd_cuts_;
  if (overtox_cut_ > lo && overtox_cut_ < hi) cuts.push_back(overtox_cut_);
  for (double c : cuts) {
    if (c > lo && c < hi) edges.push_back(c);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  // 3-point Gauss-Legendre on each panel.
  const double offset = std::sqrt(3.0 / 5.0);
  constexpr double gl_x[3] = {-1.0, 0.0, 1.0};
  constexpr double gl_w[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const double log_norm = -std::log(config_.prior_sd) - 0.5 * std::log(2.0 * std::numbers::pi);

  const std::size_t n_points = 3 * (edges.size() - 1);
  nodes_.reserve(n_points);
  log_base_.reserve(n_points);
  log_tox_.reserve(n_points * doses);
  log_nontox_.reserve(n_points * doses);
  tox_.reserve(n_points * doses);
  mtd_class_.reserve(n_points);
  overtoxic_.reserve(n_points);

  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double half = 0.5 * (edges[p + 1] - edges[p]);
    if (!(half > 0.0)) continue;
    const double mid = edges[p] + half;
    for (int k = 0; k < 3; ++k) {
      const double a = mid + gl_x[k] * offset * half;
      const double z = (a - config_.prior_mean) / config_.prior_sd;
      nodes_.push_back(a);
      log_base_.push_back(std::log(gl_w[k] * half) + log_norm - 0.5 * z * z);
      const double scale = std::exp(a);
      for (int d = 0; d < doses; ++d) {
        const double lt = scale * log_skeleton_[d];
        log_tox_.push_back(lt);
        log_nontox_.push_back(log1m_exp(lt));
        tox_.push_back(std::exp(lt));
      }
      const std::span<const double> row(log_tox_.end() - doses, log_tox_.end());
      mtd_class_.push_back(static_cast<int>(closest_from_log(row, config_.target)));
      overtoxic_.push_back(tox_[tox_.size() - static_cast<std::size_t>(doses)] > config_.target ? 1 : 0);
    }
  }
}

double ToxicityModel::dlt_probability(double alpha, int dose) const {
  check_dose(dose, doses());
  return std::pow(config_.skeleton[dose - 1], std::exp(alpha));
}

double ToxicityModel::log_likelihood(double alpha, const ObservationSet& obs) const {
  if (obs.doses() != doses()) throw std::invalid_argument("observation/dose count mismatch");
  const double scale = std::exp(alpha);
  double ll = 0.0;
  for (int d = 1; d <= doses(); ++d) {
    const int n = obs.subjects(d);
    if (n == 0) continue;
    const int y = obs.dlts(d);
    const double lt = scale * log_skeleton_[d - 1];
    if (y > 0) ll += y * lt;
    if (n > y) ll += (n - y) * log1m_exp(lt);
  }
  return ll;
}

int ToxicityModel::mtd_index(double alpha) const {
  const double scale = std::exp(alpha);
  std::vector<double> log_theta(config_.skeleton.size());
  for (std::size_t d = 0; d < log_theta.size(); ++d) log_theta[d] = scale * log_skeleton_[d];
  return static_cast<int>(closest_from_log(log_theta, config_.target)) + 1;
}

void ToxicityModel::normalized_weights(const ObservationSet& obs, std::vector<double>& w) const {
  if (obs.doses() != doses()) throw std::invalid_argument("observation/dose count mismatch");
  const std::size_t n_points = nodes_.size();
  const auto doses_sz = static_cast<std::size_t>(doses());
  w.assign(log_base_.begin(), log_base_.end());

  for (int d = 0; d < doses(); ++d) {
    const int n = obs.subjects(d + 1);
    if (n == 0) continue;
    const double y = obs.dlts(d + 1);
    const double non = n - y;
    for (std::size_t j = 0; j < n_points; ++j) {
      const std::size_t at = j * doses_sz + static_cast<std::size_t>(d);
      if (y > 0) w[j] += y * log_tox_[at];
      if (non > 0) w[j] += non * log_nontox_[at];
    }
  }

  const double peak = *std::max_element(w.begin(), w.end());
  if (!std::isfinite(peak)) throw NumericalError("posterior weights vanish on the whole grid");
  double total = 0.0;
  for (double& x : w) {
    x = std::exp(x - peak);
    total += x;
  }
  for (double& x : w) x /= total;
}

PosteriorSummary ToxicityModel::summarize_weights(std::span<const double> w) const {
  const auto doses_sz = static_cast<std::size_t>(doses());
  PosteriorSummary s;
  s.dose_means.assign(doses_sz, 0.0);
  s.mtd_probs.assign(doses_sz, 0.0);
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double wj = w[j];
    const double* row = tox_.data() + j * doses_sz;
    for (std::size_t d = 0; d < doses_sz; ++d) s.dose_means[d] += wj * row[d];
    s.mtd_probs[static_cast<std::size_t>(mtd_class_[j])] += wj;
    if (overtoxic_[j]) s.p_overtoxic += wj;
  }
  s.p_overtoxic = std::clamp(s.p_overtoxic, 0.0, 1.0);
  return s;
}

Posterior ToxicityModel::posterior(const ObservationSet& obs) const {
  Posterior post;
  normalized_weights(obs, post.weights);
  static_cast<PosteriorSummary&>(post) = summarize_weights(post.weights);
  post.nodes = nodes_;
  return post;
}

PosteriorSummary ToxicityModel::summarize(const ObservationSet& obs) const {
  thread_local std::vector<double> w;
  normalized_weights(obs, w);
  return summarize_weights(w);
}

double dlt_probability(double alpha, int dose, const ModelConfig& config) {
  check_dose(dose, config.doses());
  return std::pow(config.skeleton[dose - 1], std::exp(alpha));
}

double log_likelihood(double alpha, const ObservationSet& obs, const ModelConfig& config) {
  return ToxicityModel(config).log_likelihood(alpha, obs);
}

Posterior compute_posterior(const ObservationSet& obs, const ModelConfig& config) {
  return ToxicityModel(config).posterior(obs);
}

int mtd_index(double alpha, const ModelConfig& config) {
  std::vector<double> log_theta;
  log_theta.reserve(config.skeleton.size());
  for (double p : config.skeleton) log_theta.push_back(std::exp(alpha) * std::log(p));
  return static_cast<int>(closest_from_log(log_theta, config.target)) + 1;
}

std::vector<double> mtd_probabilities(std::span<const double> nodes,
                                      std::span<const double> weights,
                                      const ModelConfig& config) {
  if (nodes.size() != weights.size()) throw std::invalid_argument("nodes/weights size mismatch");
  std::vector<double> probs(config.skeleton.size(), 0.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    probs[static_cast<std::size_t>(mtd_index(nodes[i], config) - 1)] += weights[i];
  }
  return probs;
}

double overtoxicity_probability(std::span<const double> nodes,
                                std::span<const double> weights,
                                const ModelConfig& config) {
  if (nodes.size() != weights.size()) throw std::invalid_argument("nodes/weights size mismatch");
  double mass = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (dlt_probability(nodes[i], 1, config) > config.target) mass += weights[i];
  }
  return std::clamp(mass, 0.0, 1.0);
}

}  // namespace rcrm
