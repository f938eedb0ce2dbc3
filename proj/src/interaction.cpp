#include "blindsr/interaction.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "blindsr/errors.hpp"
#include "blindsr/ops.hpp"

namespace blindsr {

namespace {

int popcount(Coalition s) { return std::popcount(s); }

Coalition bit(int k) { return Coalition{1} << k; }

void check_pair(const CooperativeGame& game, int i, int j) {
  if (i < 0 || j < 0 || i >= game.players() || j >= game.players()) {
    throw ContractError("player index out of range");
  }
  if (i == j) throw ContractError("interaction needs two distinct players");
}

void check_context(int i, int j, Coalition s) {
  if (s & (bit(i) | bit(j))) throw ContractError("context must exclude players i and j");
}

void check_order(const CooperativeGame& game, int order) {
  if (order < 0 || order > game.players() - 2) {
    throw ContractError("order " + std::to_string(order) + " outside [0, " + std::to_string(game.players() - 2) + "]");
  }
}

Coalition others(const CooperativeGame& game, int i, int j) { return game.grand() & ~(bit(i) | bit(j)); }

// Calls fn(sub) for every subset of `set` (including the empty set and `set`).
template <typename Fn>
void for_each_subset(Coalition set, Fn&& fn) {
  Coalition sub = set;
  while (true) {
    fn(sub);
    if (sub == 0) break;
    sub = (sub - 1) & set;
  }
}

template <typename Fn>
void for_each_subset_of_size(Coalition set, int size, Fn&& fn) {
  for_each_subset(set, [&](Coalition sub) {
    if (popcount(sub) == size) fn(sub);
  });
}

template <typename Real = double>
Real binomial(int n, int k) {
  if (k < 0 || k > n) return Real(0);
  Real r = 1;
  for (int t = 1; t <= k; ++t) r = r * (n - k + t) / t;
  return r;
}

template <typename Real>
Real marginal_as(const CooperativeGame& game, int i, int j, Coalition context) {
  return (Real(game.value(context | bit(i) | bit(j))) - Real(game.value(context | bit(i)))) -
         (Real(game.value(context | bit(j))) - Real(game.value(context)));
}

// R^T(i,j) for every T subset of N \ {i,j}, indexed by the full coalition mask.
template <typename Real = double>
std::vector<Real> dividend_table(const CooperativeGame& game, int i, int j) {
  std::vector<Real> table(game.values().size(), Real(0));
  for_each_subset(others(game, i, j), [&](Coalition t) {
    const int size = popcount(t);
    Real total = 0;
    for_each_subset(t, [&](Coalition sub) {
      const Real m = marginal_as<Real>(game, i, j, sub);
      total += (size - popcount(sub)) % 2 == 0 ? m : -m;
    });
    table[t] = total;
  });
  return table;
}

template <typename Real>
Real pattern_sum(const std::vector<Real>& table, Coalition context) {
  Real total = 0;
  for_each_subset(context, [&](Coalition t) { total += table[t]; });
  return total;
}

template <typename Real>
Real fixed_survivors(const std::vector<Real>& table, Coalition rest, int order, int survivors) {
  Real outer = 0;
  Real outer_count = 0;
  for_each_subset_of_size(rest, order, [&](Coalition s) {
    Real inner = 0;
    Real inner_count = 0;
    for_each_subset_of_size(s, survivors, [&](Coalition kept) {
      inner += pattern_sum(table, kept);
      inner_count += 1;
    });
    outer += inner / inner_count;
    outer_count += 1;
  });
  return outer / outer_count;
}

}  // namespace

CooperativeGame::CooperativeGame(int players, std::vector<double> values)
    : players_(players), values_(std::move(values)) {
  if (players < 2 || players > kMaxPlayers) {
    throw ContractError("player count must lie in [2, " + std::to_string(kMaxPlayers) + "]");
  }
  if (values_.size() != (std::size_t{1} << players)) {
    throw ContractError("value table must have exactly 2^n entries");
  }
  for (double v : values_)
    if (!std::isfinite(v)) throw ContractError("game values must be finite");
}

CooperativeGame CooperativeGame::from_dividends(int players, const std::vector<double>& dividends) {
  if (dividends.size() != (std::size_t{1} << players)) throw ContractError("dividend table must have 2^n entries");
  // Zeta transform over the subset lattice.
  std::vector<double> values = dividends;
  for (int k = 0; k < players; ++k)
    for (Coalition s = 0; s < values.size(); ++s)
      if (s & bit(k)) values[s] += values[s ^ bit(k)];
  return CooperativeGame(players, std::move(values));
}

CooperativeGame CooperativeGame::random(int players, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> values(std::size_t{1} << players);
  for (double& v : values) v = dist(rng);
  return CooperativeGame(players, std::move(values));
}

CooperativeGame CooperativeGame::random_nonnegative_dividends(int players, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> dividends(std::size_t{1} << players);
  for (double& d : dividends) d = dist(rng);
  return from_dividends(players, dividends);
}

double marginal_reward(const CooperativeGame& game, int i, int j, Coalition context) {
  check_pair(game, i, j);
  check_context(i, j, context);
  return game.value(context | bit(i) | bit(j)) - game.value(context | bit(i)) - game.value(context | bit(j)) +
         game.value(context);
}

double harsanyi_reward(const CooperativeGame& game, int i, int j, Coalition pattern) {
  check_pair(game, i, j);
  check_context(i, j, pattern);
  const int size = popcount(pattern);
  double total = 0.0;
  for_each_subset(pattern, [&](Coalition sub) {
    const double sign = (size - popcount(sub)) % 2 == 0 ? 1.0 : -1.0;
    total += sign * marginal_reward(game, i, j, sub);
  });
  return total;
}

double interaction_order(const CooperativeGame& game, int i, int j, int order) {
  check_pair(game, i, j);
  check_order(game, order);
  const std::vector<double> table = dividend_table(game, i, j);
  double total = 0.0;
  double count = 0.0;
  for_each_subset_of_size(others(game, i, j), order, [&](Coalition s) {
    total += pattern_sum(table, s);
    count += 1.0;
  });
  return total / count;
}

double average_dividend(const CooperativeGame& game, int i, int j, int order) {
  check_pair(game, i, j);
  check_order(game, order);
  double total = 0.0;
  double count = 0.0;
  for_each_subset_of_size(others(game, i, j), order, [&](Coalition t) {
    total += harsanyi_reward(game, i, j, t);
    count += 1.0;
  });
  return total / count;
}

double dropout_interaction_fixed(const CooperativeGame& game, int i, int j, int order, int survivors) {
  check_pair(game, i, j);
  check_order(game, order);
  if (survivors < 0 || survivors > order) throw ContractError("survivor count must lie in [0, order]");
  return fixed_survivors(dividend_table(game, i, j), others(game, i, j), order, survivors);
}

DropoutEstimate dropout_interaction(const CooperativeGame& game, int i, int j, int order, double keep_prob,
                                    DropoutEstimator estimator, std::uint64_t samples, std::uint64_t seed) {
  check_pair(game, i, j);
  check_order(game, order);
  if (!(keep_prob >= 0.0 && keep_prob <= 1.0)) throw ContractError("keep probability must lie in [0, 1]");
  const std::vector<double> table = dividend_table(game, i, j);
  const Coalition rest = others(game, i, j);

  if (estimator == DropoutEstimator::Exhaustive) {
    double total = 0.0;
    for (int r = 0; r <= order; ++r) {
      const double weight = binomial(order, r) * std::pow(keep_prob, r) * std::pow(1.0 - keep_prob, order - r);
      if (weight == 0.0) continue;
      total += weight * fixed_survivors(table, rest, order, r);
    }
    return {total, 0.0};
  }

  if (samples < 2) throw ContractError("Monte-Carlo dropout estimate needs at least 2 samples");
  std::vector<int> pool;
  for (int k = 0; k < game.players(); ++k)
    if (rest & bit(k)) pool.push_back(k);
  Rng rng(seed);
  std::binomial_distribution<int> survivors(order, keep_prob);
  double mean = 0.0, m2 = 0.0;
  for (std::uint64_t n = 1; n <= samples; ++n) {
    // First `order` entries of a partial shuffle form S; its first r survive.
    for (int k = 0; k < order; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    const int r = survivors(rng);
    Coalition kept = 0;
    for (int k = 0; k < r; ++k) kept |= bit(pool[k]);
    const double x = pattern_sum(table, kept);
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  const double variance = m2 / static_cast<double>(samples - 1);
  return {mean, std::sqrt(variance / static_cast<double>(samples))};
}

// Evaluated in extended precision.
LemmaRatio lemma_ratio(const CooperativeGame& game, int i, int j, int order, int survivors) {
  using Real = long double;
  check_pair(game, i, j);
  check_order(game, order);
  if (survivors < 0 || survivors > order) throw ContractError("survivor count must lie in [0, order]");
  const std::vector<Real> table = dividend_table<Real>(game, i, j);
  const Coalition rest = others(game, i, j);
  const Real full = fixed_survivors(table, rest, order, order);
  if (std::abs(static_cast<double>(full)) < 1e-12) throw DegenerateInputError("lemma_ratio: |I^(s)| below 1e-12");
  Real numerator = 0, denominator = 0;
  for (int q = 0; q <= order; ++q) {
    Real total = 0, count = 0;
    for_each_subset_of_size(rest, q, [&](Coalition t) {
      total += table[t];
      count += 1;
    });
    const Real jq = total / count;
    denominator += binomial<Real>(order, q) * jq;
    if (q <= survivors) numerator += binomial<Real>(survivors, q) * jq;
  }
  return {static_cast<double>(fixed_survivors(table, rest, order, survivors) / full),
          static_cast<double>(numerator / denominator)};
}

InteractionReport interaction_report(const CooperativeGame& game, int i, int j, double keep_prob) {
  InteractionReport report;
  report.i = i;
  report.j = j;
  report.keep_prob = keep_prob;
  for (int s = 0; s <= game.players() - 2; ++s) {
    report.orders.push_back(interaction_order(game, i, j, s));
    report.dropout_orders.push_back(dropout_interaction(game, i, j, s, keep_prob).value);
    report.dividends.push_back(average_dividend(game, i, j, s));
  }
  return report;
}

Eigen::VectorXd channel_dropout_mask(Index channels, double keep_prob, Rng& rng) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw ConfigError("channel dropout keep_prob must lie in (0, 1]");
  std::bernoulli_distribution keep(keep_prob);
  Eigen::VectorXd mask(channels);
  for (Index c = 0; c < channels; ++c) mask[c] = keep(rng) ? 1.0 / keep_prob : 0.0;
  return mask;
}

Var channel_dropout(Var features, double keep_prob, Rng& rng) {
  const Tensor& x = features.value();
  if (x.dim() != 3) throw DimensionError("channel_dropout expects [C x H x W], got " + shape_string(x.shape()));
  const Eigen::VectorXd mask = channel_dropout_mask(x.extent(0), keep_prob, rng);
  Tensor full(x.shape());
  full.matrix().colwise() = mask;
  return multiply(features, full);
}

}  // namespace blindsr
