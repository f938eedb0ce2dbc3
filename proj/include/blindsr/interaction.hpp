#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "blindsr/seed.hpp"
#include "blindsr/tensor.hpp"

namespace blindsr {

// Player subsets are bitmasks: bit k set <=> player k present.
using Coalition = std::uint32_t;

inline constexpr int kMaxPlayers = 16;

/// Explicit cooperative game: one finite value per coalition, 2^n entries.
class CooperativeGame {
 public:
  CooperativeGame(int players, std::vector<double> values);

  // v(S) = sum over T subset of S of dividends[T] (Moebius recomposition).
  static CooperativeGame from_dividends(int players, const std::vector<double>& dividends);
  // Uniform random values in [-1, 1].
  static CooperativeGame random(int players, std::uint64_t seed);
  // Uniform random dividends in [0, 1]; every pairwise Harsanyi reward is >= 0.
  static CooperativeGame random_nonnegative_dividends(int players, std::uint64_t seed);

  int players() const { return players_; }
  Coalition grand() const { return (Coalition{1} << players_) - 1; }
  double value(Coalition s) const { return values_[s]; }
  const std::vector<double>& values() const { return values_; }

 private:
  int players_;
  std::vector<double> values_;
};

// v(S+i+j) - v(S+i) - v(S+j) + v(S).
double marginal_reward(const CooperativeGame& game, int i, int j, Coalition context);

// R^T(i,j) = sum over L subset of T of (-1)^(|T|-|L|) marginal_reward(i, j, L).
double harsanyi_reward(const CooperativeGame& game, int i, int j, Coalition pattern);

// I^(s)(i,j): mean over |S| = s, S excluding i and j, of sum_{T subset S} R^T(i,j).
double interaction_order(const CooperativeGame& game, int i, int j, int order);

// J^(q)(i,j): mean of R^T(i,j) over |T| = q.
double average_dividend(const CooperativeGame& game, int i, int j, int order);

enum class DropoutEstimator { Exhaustive, MonteCarlo };

struct DropoutEstimate {
  double value = 0.0;
  double standard_error = 0.0;  // zero for the exhaustive estimator
};

/// Interaction at context size s when each context player survives with probability p:
/// E_{|S|=s} E_{r ~ Binomial(s, p)} E_{S' subset S, |S'|=r} sum_{T subset S'} R^T(i,j).
DropoutEstimate dropout_interaction(const CooperativeGame& game, int i, int j, int order, double keep_prob,
                                    DropoutEstimator estimator = DropoutEstimator::Exhaustive,
                                    std::uint64_t samples = 0, std::uint64_t seed = 0);

// Same expectation conditioned on exactly `survivors` context players remaining.
double dropout_interaction_fixed(const CooperativeGame& game, int i, int j, int order, int survivors);

struct LemmaRatio {
  double lhs = 0.0;  // dropout_interaction_fixed(r) / I^(s)
  double rhs = 0.0;  // sum_q C(r,q) J^(q) / sum_q C(s,q) J^(q)
};

LemmaRatio lemma_ratio(const CooperativeGame& game, int i, int j, int order, int survivors);

struct InteractionReport {
  int i = 0;
  int j = 0;
  double keep_prob = 1.0;
  std::vector<double> orders;          // I^(s), s = 0..n-2
  std::vector<double> dropout_orders;  // I^(s)_dropout at keep_prob
  std::vector<double> dividends;       // J^(q), q = 0..n-2
};

InteractionReport interaction_report(const CooperativeGame& game, int i, int j, double keep_prob);

// Inverted channel dropout on [C x H x W]: each channel is zeroed with
// probability 1 - keep_prob, survivors are scaled by 1 / keep_prob.
Var channel_dropout(Var features, double keep_prob, Rng& rng);
// The channel mask channel_dropout would draw: one entry per channel, 0 or 1/p.
Eigen::VectorXd channel_dropout_mask(Index channels, double keep_prob, Rng& rng);

}  // namespace blindsr
