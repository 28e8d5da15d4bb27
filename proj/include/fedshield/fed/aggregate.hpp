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


// Plaintext and encrypted aggregation, the DP-LoRA privatizer, and the key
// authority that alone can decrypt an aggregate.

#ifndef FEDSHIELD_FED_AGGREGATE_HPP_
#define FEDSHIELD_FED_AGGREGATE_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fedshield/ckks/ckks.hpp"
#include "fedshield/common/seed.hpp"
#include "fedshield/fed/messages.hpp"
#include "fedshield/lora/train.hpp"

namespace fedshield::fed {

using lora::LoraUpdate;

inline std::vector<double> UniformWeights(std::size_t n) {
  Require(n >= 1, ErrorCode::kParameter, "need at least one update");
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

// Normalizes non-negative sizes to weights summing to 1.
inline std::vector<double> NormalizeWeights(std::span<const double> sizes) {
  Require(!sizes.empty(), ErrorCode::kParameter, "need at least one update");
  double total = 0;
  for (double s : sizes) {
    Require(s >= 0 && std::isfinite(s), ErrorCode::kParameter, "weights must be finite and >= 0");
    total += s;
  }
  Require(total > 0, ErrorCode::kParameter, "weights sum to zero");
  std::vector<double> out;
  for (double s : sizes) out.push_back(s / total);
  return out;
}

/// Weighted elementwise mean. Computed as u_0 + sum_i w_i (u_i - u_0), which
/// equals the weighted mean when the weights sum to 1 and returns u exactly
/// when every update is u.
inline FactorList AggregatePlain(std::span<const FactorList> updates, std::span<const double> weights) {
  Require(!updates.empty(), ErrorCode::kParameter, "cannot aggregate an empty update list");
  Require(weights.size() == updates.size(), ErrorCode::kParameter, "one weight per update required");
  double sum = 0;
  for (double w : weights) sum += w;
  Require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::kParameter, "aggregation weights must sum to 1");
  for (const auto& u : updates) lora::RequireSameShapes(updates[0], u, "aggregate");
  FactorList out = updates[0];
  for (std::size_t i = 1; i < updates.size(); ++i) {
    for (std::size_t l = 0; l < out.size(); ++l) {
      out[l].a += weights[i] * (updates[i][l].a - updates[0][l].a);
      out[l].b += weights[i] * (updates[i][l].b - updates[0][l].b);
    }
  }
  return out;
}

inline FactorList AggregatePlain(std::span<const FactorList> updates) {
  return AggregatePlain(updates, UniformWeights(updates.size()));
}

inline LoraUpdate AggregatePlain(std::span<const LoraUpdate> updates, std::span<const double> weights) {
  std::vector<FactorList> lists;
  for (const auto& u : updates) lists.push_back(u.deltas);
  return LoraUpdate{AggregatePlain(lists, weights), updates.empty() ? 0 : updates[0].round, -1};
}

/// Clips to L2 norm <= clip, then adds i.i.d. N(0, (sigma * clip)^2) noise.
inline FactorList DpPrivatize(const FactorList& update, double clip, double sigma, std::uint64_t seed) {
  Require(clip > 0 && std::isfinite(clip), ErrorCode::kParameter, "dp clip must be > 0");
  Require(sigma >= 0 && std::isfinite(sigma), ErrorCode::kParameter, "dp sigma must be >= 0");
  FactorList out = update;
  const double norm = lora::L2Norm(update);
  if (norm > clip) {
    const double f = clip / norm;
    for (lora::Matrix* m : lora::Tensors(out)) *m *= f;
  }
  if (sigma == 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma * clip);
  for (lora::Matrix* m : lora::Tensors(out)) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] += noise(rng);
  }
  return out;
}

inline LoraUpdate DpPrivatize(const LoraUpdate& update, double clip, double sigma, std::uint64_t seed) {
  return LoraUpdate{DpPrivatize(update.deltas, clip, sigma, seed), update.round, update.client_id};
}

/// Client side: packs, encodes and encrypts one update. Ciphertext j uses
/// seed DeriveSeed(seed, kEncrypt, {j}).
inline std::vector<ckks::Ciphertext> EncryptUpdate(const ckks::CkksContext& ctx, const ckks::Encryptor& enc,
                                                   const FactorList& update, std::uint64_t seed) {
  const PackingDescriptor desc = DescribePacking(update, ctx.slot_count());
  std::vector<ckks::Ciphertext> out;
  std::uint64_t j = 0;
  for (const auto& chunk : Pack(update, desc)) {
    const auto pt = ckks::Encode(ctx, chunk, ctx.params().scale);
    out.push_back(enc.Encrypt(pt, DeriveSeed(seed, Stream::kEncrypt, {j++})));
  }
  return out;
}

inline UpdateMessage MakeEncryptedMessage(const ckks::CkksContext& ctx, const ckks::Encryptor& enc,
                                          const FactorList& update, std::uint32_t client, std::uint32_t round,
                                          std::uint32_t samples, std::uint64_t seed) {
  UpdateMessage m{client, round, samples, PayloadKind::kEncrypted, DescribePacking(update, ctx.slot_count()), {}, {}};
  for (const auto& ct : EncryptUpdate(ctx, enc, update, seed)) m.ciphertexts.push_back(ckks::SerializeCiphertext(ctx, ct));
  return m;
}

inline UpdateMessage MakePlaintextMessage(const FactorList& update, std::uint32_t client, std::uint32_t round,
                                          std::uint32_t samples, std::size_t slot_count) {
  return UpdateMessage{client, round, samples, PayloadKind::kPlaintext, DescribePacking(update, slot_count), {},
                       lora::Flatten(update)};
}

/// Output of encrypted aggregation. Only AggregateEncrypted builds one, and
/// only the key authority can open it.
class EncryptedAggregate {
 public:
  const std::vector<ckks::Ciphertext>& ciphertexts() const { return cts_; }
  const PackingDescriptor& packing() const { return packing_; }
  std::uint32_t round() const { return round_; }
  std::size_t contributors() const { return contributors_; }
  // 1 when the mean was formed homomorphically, else the factor to apply
  // after decryption.
  double pending_factor() const { return pending_factor_; }

 private:
  friend EncryptedAggregate AggregateEncrypted(const ckks::CkksContext&, std::span<const UpdateMessage>,
                                               std::span<const double>, bool);
  std::vector<ckks::Ciphertext> cts_;
  PackingDescriptor packing_;
  std::uint32_t round_ = 0;
  std::size_t contributors_ = 0;
  double pending_factor_ = 1.0;
};

/// Server side, sees ciphertexts only. Uniform weights: homomorphic sum, then
/// one plaintext multiply by 1/|n_t| (one level). Non-uniform weights: each
/// client's ciphertexts are multiplied by w_i before summation. With
/// `average_after_decrypt` the sum is left unscaled and the factor travels
/// with the aggregate.
inline EncryptedAggregate AggregateEncrypted(const ckks::CkksContext& ctx, std::span<const UpdateMessage> messages,
                                             std::span<const double> weights, bool average_after_decrypt = false) {
  Require(!messages.empty(), ErrorCode::kParameter, "cannot aggregate an empty message list");
  Require(weights.size() == messages.size(), ErrorCode::kParameter, "one weight per message required");
  const auto& first = messages[0];
  for (const auto& m : messages) {
    Require(m.kind == PayloadKind::kEncrypted, ErrorCode::kState, "plaintext message in encrypted aggregation");
    Require(m.round == first.round, ErrorCode::kState, "messages from different rounds");
    Require(m.packing == first.packing, ErrorCode::kShape, "packing descriptor mismatch");
  }
  Require(first.packing.slot_count == ctx.slot_count(), ErrorCode::kShape, "packing slot count does not match context");
  bool uniform = true;
  for (double w : weights) uniform = uniform && std::abs(w - weights[0]) <= 1e-15;
  double sum = 0;
  for (double w : weights) sum += w;
  Require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::kParameter, "aggregation weights must sum to 1");

  EncryptedAggregate agg;
  agg.packing_ = first.packing;
  agg.round_ = first.round;
  agg.contributors_ = messages.size();
  const std::size_t n_ct = first.packing.ciphertext_count();
  for (std::size_t j = 0; j < n_ct; ++j) {
    ckks::Ciphertext acc;
    for (std::size_t i = 0; i < messages.size(); ++i) {
      ckks::Ciphertext ct = ckks::DeserializeCiphertext(ctx, messages[i].ciphertexts[j]);
      if (!uniform && !average_after_decrypt) ct = ckks::MulPlainScalar(ctx, ct, weights[i]);
      acc = i == 0 ? std::move(ct) : ckks::Add(ctx, acc, ct);
    }
    if (uniform && !average_after_decrypt) acc = ckks::MulPlainScalar(ctx, acc, weights[0]);
    agg.cts_.push_back(std::move(acc));
  }
  if (average_after_decrypt) {
    Require(uniform, ErrorCode::kParameter, "after-decrypt averaging requires uniform weights");
    agg.pending_factor_ = weights[0];
  }
  return agg;
}

/// Holder of the secret key. Decrypts aggregates only; it never receives
/// individual client messages.
class KeyAuthority {
 public:
  KeyAuthority(ckks::ContextPtr ctx, std::uint64_t seed) : ctx_(std::move(ctx)) {
    auto [sk, pk] = ckks::KeyGen(*ctx_, seed);
    sk_ = std::move(sk);
    pk_ = std::move(pk);
  }

  const ckks::PublicKey& public_key() const { return pk_; }
  const ckks::ContextPtr& context() const { return ctx_; }

  // Scales the decode scale; 1 is correct. Other values model a
  // mis-configured decoder for diagnostics.
  void set_decode_scale_factor(double f) { decode_scale_factor_ = f; }

  FactorList DecryptAggregate(const EncryptedAggregate& agg) const {
    std::vector<std::vector<double>> chunks;
    for (const auto& ct : agg.ciphertexts()) {
      ckks::Plaintext pt = ckks::Decrypt(*ctx_, ct, sk_);
      pt.scale *= decode_scale_factor_;
      auto values = ckks::Decode(*ctx_, pt);
      if (agg.pending_factor() != 1.0) {
        for (double& v : values) v *= agg.pending_factor();
      }
      chunks.push_back(std::move(values));
    }
    return Unpack(chunks, agg.packing());
  }

 private:
  ckks::ContextPtr ctx_;
  ckks::SecretKey sk_;
  ckks::PublicKey pk_;
  double decode_scale_factor_ = 1.0;
};

}  // namespace fedshield::fed

#endif  // FEDSHIELD_FED_AGGREGATE_HPP_
