#include "blindsr/gradcheck_suite.hpp"

#include <functional>
#include <random>

#include "blindsr/alignment.hpp"
#include "blindsr/config.hpp"
#include "blindsr/interaction.hpp"
#include "blindsr/ops.hpp"
#include "blindsr/seed.hpp"
#include "blindsr/training.hpp"

namespace blindsr {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double sd = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, sd);
  for (Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

// Contracts a non-scalar output with fixed random weights so every output
// coordinate contributes a distinct amount.
Var project(Var out, const Tensor& weights) { return sum(multiply(out, weights)); }

struct OpCase {
  std::string name;
  std::function<GradCheckReport(Rng&, double, double)> run;
};

GradCheckReport check(const ScalarFunction& f, const Tensor& x, double step, double tol) {
  return grad_check(f, x, step, tol);
}

TrainingSample tiny_sample(const ModelConfig& m, Rng& rng) {
  const Index lr = 4, hr = lr * m.scale;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TrainingSample s;
  s.hr = Tensor({m.image_channels, hr, hr});
  s.lr1 = Tensor({m.image_channels, lr, lr});
  s.lr2 = Tensor({m.image_channels, lr, lr});
  for (Index i = 0; i < s.hr.size(); ++i) s.hr[i] = u(rng);
  for (Index i = 0; i < s.lr1.size(); ++i) s.lr1[i] = u(rng);
  for (Index i = 0; i < s.lr2.size(); ++i) s.lr2[i] = u(rng);
  return s;
}

GradCheckReport training_graph(Rng& rng, double step, double tol, RegularizerKind kind, AlignmentMode mode) {
  TrainConfig config;
  config.model.features = 4;
  config.model.blocks = 1;
  config.model.scale = 2;
  config.regularizer.kind = kind;
  config.regularizer.alignment.mode = mode;
  config.regularizer.alignment.rff_dim = 3;
  config.regularizer.brute_force_weight = 0.01;
  config.seeds.root = rng();
  ToyModel model(config.model, config.seeds.init_seed());
  const TrainingSample sample = tiny_sample(config.model, rng);
  const std::uint64_t mask_seed = rng();
  std::vector<Tensor*> params;
  for (NamedTensor& p : model.parameters()) params.push_back(&p.tensor);
  auto loss = [&](Tape& tape) {
    Rng dropout_rng(mask_seed);
    return build_sample_loss(tape, model, sample, config, dropout_rng).total;
  };
  return grad_check_parameters(loss, params, step, tol);
}

std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  cases.push_back({"conv2d.input", [](Rng& rng, double h, double tol) {
                     const Tensor w = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
                     const Tensor r = random_tensor({3, 5, 4}, rng);
                     auto f = [&](Tape& t, Var x) { return project(conv2d(x, t.constant(w), t.constant(b), 1), r); };
                     return check(f, random_tensor({2, 5, 4}, rng), h, tol);
                   }});
  cases.push_back({"conv2d.weights", [](Rng& rng, double h, double tol) {
                     const Tensor in = random_tensor({2, 5, 4}, rng), b = random_tensor({3}, rng);
                     const Tensor r = random_tensor({3, 5, 4}, rng);
                     auto f = [&](Tape& t, Var w) { return project(conv2d(t.constant(in), w, t.constant(b), 1), r); };
                     return check(f, random_tensor({3, 2, 3, 3}, rng), h, tol);
                   }});
  cases.push_back({"conv2d.bias", [](Rng& rng, double h, double tol) {
                     const Tensor in = random_tensor({2, 5, 4}, rng), w = random_tensor({3, 2, 3, 3}, rng);
                     const Tensor r = random_tensor({3, 5, 4}, rng);
                     auto f = [&](Tape& t, Var b) { return project(conv2d(t.constant(in), t.constant(w), b, 1), r); };
                     return check(f, random_tensor({3}, rng), h, tol);
                   }});
  cases.push_back({"leaky_relu", [](Rng& rng, double h, double tol) {
                     const Tensor r = random_tensor({3, 4, 4}, rng);
                     auto f = [&](Tape&, Var x) { return project(leaky_relu(x, 0.2), r); };
                     return check(f, random_tensor({3, 4, 4}, rng), h, tol);
                   }});
  cases.push_back({"upsample_nearest", [](Rng& rng, double h, double tol) {
                     const Tensor r = random_tensor({2, 6, 8}, rng);
                     auto f = [&](Tape&, Var x) { return project(upsample_nearest(x, 2), r); };
                     return check(f, random_tensor({2, 3, 4}, rng), h, tol);
                   }});
  cases.push_back({"spatial_mean", [](Rng& rng, double h, double tol) {
                     const Tensor r = random_tensor({1, 4}, rng);
                     auto f = [&](Tape&, Var x) { return project(spatial_mean(x), r); };
                     return check(f, random_tensor({9, 4}, rng), h, tol);
                   }});
  for (auto conv : {CovarianceConvention::Standard, CovarianceConvention::PaperLiteral}) {
    const std::string suffix = "." + std::string(convention_name(conv));
    cases.push_back({"channel_covariance" + suffix, [conv](Rng& rng, double h, double tol) {
                       const Tensor r = random_tensor({4, 4}, rng);
                       auto f = [&](Tape&, Var x) { return project(channel_covariance(x, conv), r); };
                       return check(f, random_tensor({9, 4}, rng), h, tol);
                     }});
    cases.push_back({"linear_alignment_loss" + suffix, [conv](Rng& rng, double h, double tol) {
                       const Tensor other = random_tensor({9, 4}, rng);
                       auto f = [&](Tape& t, Var x) { return linear_alignment_loss(x, t.constant(other), conv); };
                       return check(f, random_tensor({9, 4}, rng), h, tol);
                     }});
  }
  cases.push_back({"rff_map", [](Rng& rng, double h, double tol) {
                     const RffProjector proj(rng(), 3);
                     const Tensor r = random_tensor({6, 12}, rng);
                     auto f = [&](Tape&, Var x) { return project(rff_map(x, proj), r); };
                     return check(f, random_tensor({6, 4}, rng), h, tol);
                   }});
  cases.push_back({"nonlinear_alignment_loss", [](Rng& rng, double h, double tol) {
                     const RffProjector proj(rng(), 3);
                     const Tensor other = random_tensor({8, 3}, rng);
                     auto f = [&](Tape& t, Var x) { return nonlinear_alignment_loss(x, t.constant(other), proj); };
                     return check(f, random_tensor({8, 3}, rng), h, tol);
                   }});
  cases.push_back({"feature_matrix", [](Rng& rng, double h, double tol) {
                     const Tensor r = random_tensor({12, 2}, rng);
                     auto f = [&](Tape&, Var x) { return project(feature_matrix(x), r); };
                     return check(f, random_tensor({2, 3, 4}, rng), h, tol);
                   }});
  cases.push_back({"matmul", [](Rng& rng, double h, double tol) {
                     const Tensor b = random_tensor({4, 3}, rng), r = random_tensor({5, 3}, rng);
                     auto f = [&](Tape& t, Var x) { return project(matmul(x, t.constant(b)), r); };
                     return check(f, random_tensor({5, 4}, rng), h, tol);
                   }});
  cases.push_back({"l1_loss", [](Rng& rng, double h, double tol) {
                     const Tensor target = random_tensor({3, 4, 4}, rng);
                     auto f = [&](Tape&, Var x) { return l1_loss(x, target); };
                     return check(f, random_tensor({3, 4, 4}, rng), h, tol);
                   }});
  cases.push_back({"training_step.none", [](Rng& rng, double h, double tol) {
                     return training_graph(rng, h, tol, RegularizerKind::None, AlignmentMode::Linear);
                   }});
  cases.push_back({"training_step.dropout", [](Rng& rng, double h, double tol) {
                     return training_graph(rng, h, tol, RegularizerKind::Dropout, AlignmentMode::Linear);
                   }});
  cases.push_back({"training_step.align_linear", [](Rng& rng, double h, double tol) {
                     return training_graph(rng, h, tol, RegularizerKind::Align, AlignmentMode::Linear);
                   }});
  cases.push_back({"training_step.align_nonlinear", [](Rng& rng, double h, double tol) {
                     return training_graph(rng, h, tol, RegularizerKind::Align, AlignmentMode::Nonlinear);
                   }});
  cases.push_back({"training_step.brute_force", [](Rng& rng, double h, double tol) {
                     return training_graph(rng, h, tol, RegularizerKind::BruteForce, AlignmentMode::Linear);
                   }});
  return cases;
}

}  // namespace

std::vector<std::string> gradcheck_case_names() {
  std::vector<std::string> names;
  for (const OpCase& c : op_cases()) names.push_back(c.name);
  return names;
}

std::vector<GradCheckCase> run_gradcheck_suite(int seeds, std::uint64_t base_seed, double tol, double step) {
  std::vector<GradCheckCase> results;
  const std::vector<OpCase> cases = op_cases();
  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
    for (std::size_t c = 0; c < cases.size(); ++c) {
      Rng rng(derive_seed(seed, c));
      results.push_back({cases[c].name, seed, cases[c].run(rng, step, tol)});
    }
  }
  return results;
}

}  // namespace blindsr
