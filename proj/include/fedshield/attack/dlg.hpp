// Copyright 2026 The FedShield Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Gradient-matching (DLG-style) input reconstruction against plaintext,
// possibly pruned, single-sample LoRA updates.

#ifndef FEDSHIELD_ATTACK_DLG_HPP_
#define FEDSHIELD_ATTACK_DLG_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "fedshield/common/parallel.hpp"
#include "fedshield/common/seed.hpp"
#include "fedshield/lora/model.hpp"
#include "fedshield/pruning/pruning.hpp"

namespace fedshield::attack {

using lora::FactorList;
using lora::Matrix;

/// Single dense layer with identity activation, MSE loss, and a LoRA adapter
/// whose B factor is non-zero (a partially trained adapter).
struct VictimSpec {
  int d_in = 16;
  int d_out = 4;
  int rank = 4;
  double alpha = 4.0;
  double b_scale = 1.0;  // std of the victim's B entries
  double lr = 0.1;       // victim's SGD step; update = -lr * gradient
};

// kSpectral seeds the first two restarts with +/- the leading left singular
// vector of the observed A-update, which is rank one (input outer residual)
// when unpruned; remaining restarts are random.
enum class InitKind { kRandom, kSpectral };

inline std::string_view InitKindName(InitKind k) { return k == InitKind::kRandom ? "random" : "spectral"; }

inline InitKind ParseInitKind(std::string_view s) {
  if (s == "random") return InitKind::kRandom;
  if (s == "spectral") return InitKind::kSpectral;
  Fail(ErrorCode::kParameter, "unknown attack init '" + std::string(s) + "'");
}

/// Defaults: 300 gradient steps from 8 starts with spectral seeding; each
/// step backtracks from lr along the negative gradient (Armijo). Setting
/// line_search = false, restarts = 1, init = random gives fixed-step DLG.
struct AttackConfig {
  int steps = 300;
  double lr = 1.0;
  int trials = 20;
  std::vector<double> rates = {0.0, 0.5, 0.7, 0.9};
  VictimSpec victim;
  std::uint64_t seed = 1;
  double init_std = 1.0;  // std of the dummy input's initial entries
  int restarts = 8;       // independent initializations; lowest residual wins
  InitKind init = InitKind::kSpectral;
  bool line_search = true;
  int threads = 1;
};

inline void ValidateAttackConfig(const AttackConfig& c) {
  Require(c.trials >= 1, ErrorCode::kParameter, "attack.trials must be >= 1");
  Require(c.steps >= 0, ErrorCode::kParameter, "attack.steps must be >= 0");
  Require(c.lr > 0, ErrorCode::kParameter, "attack.lr must be > 0");
  Require(c.restarts >= 1, ErrorCode::kParameter, "attack.restarts must be >= 1");
  Require(c.init_std > 0, ErrorCode::kParameter, "attack.init_std must be > 0");
  Require(!c.rates.empty(), ErrorCode::kParameter, "attack.rates must not be empty");
  for (double p : c.rates) Require(p >= 0 && p < 1, ErrorCode::kParameter, "attack rates must be in [0, 1)");
  const auto& v = c.victim;
  Require(v.d_in >= 1 && v.d_out >= 1 && v.rank >= 1 && v.rank <= std::min(v.d_in, v.d_out), ErrorCode::kParameter,
          "invalid victim dimensions");
}

struct Victim {
  lora::Model model;
  lora::AdapterSet adapters;
  double lr = 0.1;
};

inline Victim MakeVictim(const VictimSpec& spec, std::uint64_t seed) {
  lora::ModelSpec ms;
  ms.layer_sizes = {spec.d_in, spec.d_out};
  ms.ranks = {spec.rank};
  ms.alpha = spec.alpha;
  ms.output_activation = lora::Activation::kIdentity;
  auto [model, adapters] = lora::InitModel(ms, seed);
  std::mt19937_64 rng(DeriveSeed(seed, Stream::kAttack, {0}));
  std::normal_distribution<double> normal(0.0, spec.b_scale);
  Matrix& b = adapters.adapters[0].b;
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = normal(rng);
  return Victim{std::move(model), std::move(adapters), spec.lr};
}

/// What an honest-but-curious server sees for one client sample.
struct CapturedUpdate {
  Matrix input;   // 1 x d_in ground truth, used for scoring only
  Matrix target;  // 1 x d_out, known to the attacker
  FactorList observed;
};

/// One SGD step on a single sample, then L1-magnitude pruning at rate p.
inline CapturedUpdate CaptureUpdate(const Victim& victim, const Matrix& x, const Matrix& y, double p) {
  Require(x.rows() == 1 && y.rows() == 1, ErrorCode::kShape, "capture expects a single-sample batch");
  const auto br = lora::Backward(victim.model, victim.adapters, x, y, lora::LossKind::kMse);
  FactorList update = br.gradients.grads;
  for (Matrix* m : lora::Tensors(update)) *m *= -victim.lr;
  return CapturedUpdate{x, y, pruning::ApplyMask(update, pruning::ComputeMask(update, p))};
}

/// Normalized gradient-match loss ||(-lr * grad(x)) . m - O||^2 / ||O||^2
/// and its gradient with respect to the dummy input x (1 x d_in). The mask
/// m is the observed non-zero pattern.
inline double MatchLoss(const Victim& v, const FactorList& observed, const Matrix& y, const Matrix& x,
                        Matrix* d_x = nullptr) {
  const auto& layer = v.model.layers[0];
  const auto& ad = v.adapters.adapters[0];
  const double s = ad.scaling();
  const double c = 2.0 / static_cast<double>(y.size());
  const Matrix u = x * ad.a;                                              // 1 x r
  const Matrix z = x * layer.weight.transpose() + layer.bias.transpose() + s * u * ad.b;  // 1 x d_out
  const Matrix delta = c * (z - y);
  const Matrix vv = delta * ad.b.transpose();  // 1 x r
  const Matrix pa = -v.lr * s * (x.transpose() * vv);
  const Matrix pb = -v.lr * s * (u.transpose() * delta);
  const Matrix& oa = observed[0].a;
  const Matrix& ob = observed[0].b;
  const Matrix ma = (oa.array() != 0.0).cast<double>().matrix();
  const Matrix mb = (ob.array() != 0.0).cast<double>().matrix();
  const double norm = oa.squaredNorm() + ob.squaredNorm();
  Require(norm > 0, ErrorCode::kState, "observed update is all zeros");
  const Matrix ra = pa.cwiseProduct(ma) - oa;
  const Matrix rb = pb.cwiseProduct(mb) - ob;
  const double loss = (ra.squaredNorm() + rb.squaredNorm()) / norm;
  if (d_x == nullptr) return loss;

  // Reverse pass: H = dL/dg for each gradient factor.
  const Matrix ha = (-2.0 * v.lr / norm) * ra.cwiseProduct(ma);
  const Matrix hb = (-2.0 * v.lr / norm) * rb.cwiseProduct(mb);
  Matrix dx = s * vv * ha.transpose();       // through g_A = s x^T v
  const Matrix dv = s * x * ha;              // 1 x r
  Matrix du = s * delta * hb.transpose();    // through g_B = s u^T delta
  Matrix ddelta = s * u * hb + dv * ad.b;    // 1 x d_out
  const Matrix dz = c * ddelta;
  dx += dz * layer.weight;
  du += s * dz * ad.b.transpose();
  dx += du * ad.a.transpose();
  *d_x = std::move(dx);
  return loss;
}

enum class TrialStatus { kOk, kDiverged, kUninformative };

inline std::string_view TrialStatusName(TrialStatus s) {
  switch (s) {
    case TrialStatus::kOk: return "ok";
    case TrialStatus::kDiverged: return "diverged";
    case TrialStatus::kUninformative: return "uninformative";
  }
  return "unknown";
}

struct AttackOutcome {
  Matrix reconstruction;
  double residual = std::numeric_limits<double>::quiet_NaN();
  TrialStatus status = TrialStatus::kOk;
};

namespace internal {

inline AttackOutcome Descend(const Victim& v, const FactorList& observed, const Matrix& target,
                             const AttackConfig& cfg, Matrix x) {
  AttackOutcome out;
  Matrix grad;
  for (int step = 0; step < cfg.steps; ++step) {
    const double loss = MatchLoss(v, observed, target, x, &grad);
    if (!std::isfinite(loss) || !grad.allFinite()) {
      out.status = TrialStatus::kDiverged;
      return out;
    }
    Matrix delta = cfg.lr * grad;
    if (cfg.line_search) {
      const double slope = grad.cwiseProduct(delta).sum();
      for (int halvings = 0; halvings < 60; ++halvings) {
        const double trial = MatchLoss(v, observed, target, x - delta);
        if (std::isfinite(trial) && trial <= loss - 1e-4 * slope) break;
        delta *= 0.5;
      }
    }
    x -= delta;
  }
  out.residual = MatchLoss(v, observed, target, x);
  if (!std::isfinite(out.residual) || !x.allFinite()) {
    out.status = TrialStatus::kDiverged;
    return out;
  }
  out.reconstruction = std::move(x);
  return out;
}

}  // namespace internal

/// Gradient descent on the dummy input from `restarts` starting points;
/// keeps the run with the smallest final match residual. The observed
/// zero pattern is reused as the mask.
inline AttackOutcome DlgAttack(const Victim& v, const FactorList& observed, const Matrix& target,
                               const AttackConfig& cfg, std::uint64_t init_seed) {
  const int d_in = v.model.input_dim();
  AttackOutcome best;
  best.reconstruction = Matrix::Zero(1, d_in);
  if (lora::SquaredNorm(observed) == 0.0) {
    best.status = TrialStatus::kUninformative;
    return best;
  }
  best.status = TrialStatus::kDiverged;
  Matrix direction;
  if (cfg.init == InitKind::kSpectral && observed[0].a.squaredNorm() > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(observed[0].a, Eigen::ComputeThinU);
    direction = svd.matrixU().col(0).transpose() * (cfg.init_std * std::sqrt(static_cast<double>(d_in)));
  }
  for (int k = 0; k < std::max(cfg.restarts, 1); ++k) {
    Matrix x(1, d_in);
    if (direction.size() > 0 && k < 2) {
      x = k == 0 ? direction : Matrix(-direction);
    } else {
      std::mt19937_64 rng(DeriveSeed(init_seed, Stream::kAttack, {static_cast<std::uint64_t>(k)}));
      std::normal_distribution<double> normal(0.0, cfg.init_std);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    }
    AttackOutcome run = internal::Descend(v, observed, target, cfg, std::move(x));
    if (run.status == TrialStatus::kOk && (best.status != TrialStatus::kOk || run.residual < best.residual)) {
      best = std::move(run);
    }
  }
  return best;
}

inline double InputMse(const Matrix& truth, const Matrix& guess) {
  return (truth - guess).squaredNorm() / static_cast<double>(truth.size());
}

inline double Cosine(const Matrix& a, const Matrix& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0 || nb == 0) return 0.0;
  return std::clamp(a.cwiseProduct(b).sum() / (na * nb), -1.0, 1.0);
}

struct ReconstructionResult {
  double rate = 0;
  std::vector<double> mse;  // NaN for failed trials
  std::vector<double> cosine;
  std::vector<double> residual;
  std::vector<TrialStatus> status;

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(status.begin(), status.end(), [](TrialStatus s) { return s != TrialStatus::kOk; }));
  }
};

// Failed trials count as infinitely bad reconstructions.
inline double ScoredMse(const ReconstructionResult& r, std::size_t i) {
  return r.status[i] == TrialStatus::kOk ? r.mse[i] : std::numeric_limits<double>::infinity();
}

/// Linear-interpolated quantile (type 7) of the scored MSEs.
inline double MseQuantile(const ReconstructionResult& r, double q) {
  std::vector<double> v;
  for (std::size_t i = 0; i < r.mse.size(); ++i) v.push_back(ScoredMse(r, i));
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  if (lo == hi || v[lo] == v[hi]) return v[lo];
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double MedianMse(const ReconstructionResult& r) { return MseQuantile(r, 0.5); }

inline double SuccessRate(const ReconstructionResult& r, double mse_threshold) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < r.mse.size(); ++i) ok += ScoredMse(r, i) < mse_threshold ? 1 : 0;
  return r.mse.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(r.mse.size());
}

/// Runs one trial: trial k draws its victim, sample and dummy initialization
/// from seeds that do not depend on the rate, so rows are paired across rates.
inline void RunTrial(const AttackConfig& cfg, double rate, int trial, double& mse, double& cosine, double& residual,
                     TrialStatus& status) {
  const auto k = static_cast<std::uint64_t>(trial);
  const Victim victim = MakeVictim(cfg.victim, DeriveSeed(cfg.seed, Stream::kAttack, {k, 1}));
  std::mt19937_64 rng(DeriveSeed(cfg.seed, Stream::kAttack, {k, 2}));
  std::normal_distribution<double> normal;
  Matrix x(1, cfg.victim.d_in);
  Matrix y(1, cfg.victim.d_out);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = normal(rng);
  const CapturedUpdate cap = CaptureUpdate(victim, x, y, rate);
  const AttackOutcome out = DlgAttack(victim, cap.observed, cap.target, cfg, DeriveSeed(cfg.seed, Stream::kAttack, {k, 3}));
  status = out.status;
  residual = out.residual;
  if (out.status == TrialStatus::kOk) {
    mse = InputMse(x, out.reconstruction);
    cosine = Cosine(x, out.reconstruction);
  } else {
    mse = std::numeric_limits<double>::quiet_NaN();
    cosine = std::numeric_limits<double>::quiet_NaN();
  }
}

inline std::vector<ReconstructionResult> SweepPruneRates(const AttackConfig& cfg) {
  ValidateAttackConfig(cfg);
  std::vector<ReconstructionResult> results;
  for (double rate : cfg.rates) {
    ReconstructionResult r;
    r.rate = rate;
    const auto n = static_cast<std::size_t>(cfg.trials);
    r.mse.resize(n);
    r.cosine.resize(n);
    r.residual.resize(n);
    r.status.resize(n);
    ParallelFor(n, cfg.threads, [&](std::size_t i) {
      RunTrial(cfg, rate, static_cast<int>(i), r.mse[i], r.cosine[i], r.residual[i], r.status[i]);
    });
    results.push_back(std::move(r));
  }
  return results;
}

/// True when median MSE never decreases from one rate to the next.
inline bool MediansNonDecreasing(const std::vector<ReconstructionResult>& results) {
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (MedianMse(results[i]) < MedianMse(results[i - 1])) return false;
  }
  return true;
}

struct SignTest {
  int wins = 0;    // pairs where the second sample is larger
  int losses = 0;
  int ties = 0;
  double p_value = 1.0;  // one-sided, P(X >= wins) under Binomial(wins + losses, 1/2)
};

inline double BinomialUpperTail(int k, int n) {
  Require(n >= 0 && n <= 1000, ErrorCode::kParameter, "binomial tail supports n <= 1000");
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  // C(n, i) by the multiplicative recurrence; exact for the n used here.
  double c = 1.0;
  double tail = 0.0;
  for (int i = 0; i <= n; ++i) {
    if (i > 0) c = c * (n - i + 1) / i;
    if (i >= k) tail += c;
  }
  return std::min(1.0, std::ldexp(tail, -n));
}

/// Paired one-sided sign test of "higher rate gives larger MSE".
inline SignTest PairedSignTest(const ReconstructionResult& lower, const ReconstructionResult& higher) {
  Require(lower.mse.size() == higher.mse.size(), ErrorCode::kShape, "sign test needs paired trials");
  SignTest t;
  for (std::size_t i = 0; i < lower.mse.size(); ++i) {
    const double a = ScoredMse(lower, i);
    const double b = ScoredMse(higher, i);
    if (b > a) {
      ++t.wins;
    } else if (b < a) {
      ++t.losses;
    } else {
      ++t.ties;
    }
  }
  t.p_value = BinomialUpperTail(t.wins, t.wins + t.losses);
  return t;
}

inline void WriteTrialsCsv(std::ostream& out, const std::vector<ReconstructionResult>& results) {
  out << "prune_rate,trial,mse,cosine,grad_residual\n";
  out.precision(17);
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.mse.size(); ++i) {
      out << r.rate << ',' << i << ',' << r.mse[i] << ',' << r.cosine[i] << ',' << r.residual[i] << '\n';
    }
  }
}

inline void WriteSummaryCsv(std::ostream& out, const std::vector<ReconstructionResult>& results,
                            double success_threshold = 1e-3) {
  out << "prune_rate,trials,median_mse,q1_mse,q3_mse,median_cosine,success_rate,failures\n";
  out.precision(17);
  for (const auto& r : results) {
    std::vector<double> cos;
    for (std::size_t i = 0; i < r.cosine.size(); ++i) cos.push_back(r.status[i] == TrialStatus::kOk ? r.cosine[i] : -1.0);
    std::sort(cos.begin(), cos.end());
    const double median_cos =
        cos.empty() ? 0.0 : (cos.size() % 2 ? cos[cos.size() / 2] : 0.5 * (cos[cos.size() / 2 - 1] + cos[cos.size() / 2]));
    out << r.rate << ',' << r.mse.size() << ',' << MedianMse(r) << ',' << MseQuantile(r, 0.25) << ','
        << MseQuantile(r, 0.75) << ',' << median_cos << ',' << SuccessRate(r, success_threshold) << ','
        << r.failures() << '\n';
  }
}

}  // namespace fedshield::attack

#endif  // FEDSHIELD_ATTACK_DLG_HPP_
