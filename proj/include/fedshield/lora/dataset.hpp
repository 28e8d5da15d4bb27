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

// Synthetic tasks with known optima and IID partitioning across clients.

#ifndef FEDSHIELD_LORA_DATASET_HPP_
#define FEDSHIELD_LORA_DATASET_HPP_

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedshield/lora/model.hpp"

namespace fedshield::lora {

enum class Task { kRegression, kClassification };

inline std::string_view TaskName(Task t) {
  return t == Task::kRegression ? "regression" : "classification";
}

inline Task ParseTask(std::string_view s) {
  if (s == "regression") return Task::kRegression;
  if (s == "classification") return Task::kClassification;
  Fail(ErrorCode::kParameter, "unknown task '" + std::string(s) + "'");
}

inline LossKind LossFor(Task t) { return t == Task::kRegression ? LossKind::kMse : LossKind::kCrossEntropy; }

struct ToyDataset {
  Matrix inputs;   // n x d_in
  Matrix targets;  // n x d_out; one-hot rows for classification
  std::vector<int> labels;  // classification only
  Task task = Task::kRegression;

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }

  ToyDataset Rows(std::span<const std::size_t> idx) const {
    ToyDataset out;
    out.task = task;
    out.inputs.resize(static_cast<Eigen::Index>(idx.size()), inputs.cols());
    out.targets.resize(static_cast<Eigen::Index>(idx.size()), targets.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(idx[i]));
      out.targets.row(static_cast<Eigen::Index>(i)) = targets.row(static_cast<Eigen::Index>(idx[i]));
      if (!labels.empty()) out.labels.push_back(labels[idx[i]]);
    }
    return out;
  }
};

inline void ValidateDataset(const ToyDataset& d) {
  Require(d.size() >= 1, ErrorCode::kParameter, "dataset is empty");
  Require(d.targets.rows() == d.inputs.rows(), ErrorCode::kShape, "inputs/targets row mismatch");
  Require(d.inputs.allFinite() && d.targets.allFinite(), ErrorCode::kNumeric, "dataset has non-finite values");
}

struct TaskSpec {
  Task task = Task::kRegression;
  double noise = 0.1;       // target noise std (regression)
  int planted_rank = 2;     // rank of the planted adapter shift
  double shift_scale = 1.0; // std of the planted B factors
  double separation = 2.0;  // class-center std (classification)
};

/// Draws samples from a fixed synthetic task. Regression targets come from
/// the frozen base network plus a planted low-rank adapter shift, so a
/// student adapter of rank >= planted_rank can reach the noise floor.
class TaskGenerator {
 public:
  TaskGenerator(const Model& model, const TaskSpec& spec, std::uint64_t seed)
      : model_(model), spec_(spec) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d_in = model.input_dim();
    const int d_out = model.output_dim();
    if (spec.task == Task::kRegression) {
      for (const auto& layer : model.layers) {
        const int r = std::min({spec.planted_rank, layer.d_in(), layer.d_out()});
        Require(r >= 1, ErrorCode::kParameter, "planted rank must be >= 1");
        LoraAdapter ad;
        ad.rank = r;
        ad.alpha = r;
        ad.a = Matrix(layer.d_in(), r);
        ad.b = Matrix(r, layer.d_out());
        const double a_std = 1.0 / std::sqrt(static_cast<double>(layer.d_in()));
        for (Eigen::Index i = 0; i < ad.a.size(); ++i) ad.a.data()[i] = a_std * normal(rng);
        for (Eigen::Index i = 0; i < ad.b.size(); ++i) ad.b.data()[i] = spec.shift_scale * normal(rng);
        teacher_.adapters.push_back(std::move(ad));
      }
    } else {
      Require(d_out >= 2, ErrorCode::kParameter, "classification needs >= 2 outputs");
      centers_ = Matrix(d_out, d_in);
      const double std = spec.separation / std::sqrt(static_cast<double>(d_in)) * 2.0;
      for (Eigen::Index i = 0; i < centers_.size(); ++i) centers_.data()[i] = std * normal(rng);
    }
  }

  const AdapterSet& teacher() const { return teacher_; }
  Task task() const { return spec_.task; }

  ToyDataset Sample(std::size_t n, std::uint64_t seed) const {
    Require(n >= 1, ErrorCode::kParameter, "sample count must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::Index rows = static_cast<Eigen::Index>(n);
    const int d_in = model_.input_dim();
    const int d_out = model_.output_dim();
    ToyDataset d;
    d.task = spec_.task;
    d.inputs = Matrix(rows, d_in);
    if (spec_.task == Task::kRegression) {
      for (Eigen::Index i = 0; i < d.inputs.size(); ++i) d.inputs.data()[i] = normal(rng);
      d.targets = Forward(model_, teacher_, d.inputs);
      for (Eigen::Index i = 0; i < d.targets.size(); ++i) d.targets.data()[i] += spec_.noise * normal(rng);
    } else {
      std::uniform_int_distribution<int> label_dist(0, d_out - 1);
      d.targets = Matrix::Zero(rows, d_out);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const int label = label_dist(rng);
        d.labels.push_back(label);
        d.targets(i, label) = 1.0;
        for (int k = 0; k < d_in; ++k) d.inputs(i, k) = centers_(label, k) + normal(rng);
      }
    }
    return d;
  }

 private:
  Model model_;
  TaskSpec spec_;
  AdapterSet teacher_;
  Matrix centers_;
};

/// Generates one pool of clients * per_client samples, shuffles it uniformly
/// and splits it into disjoint equal parts.
inline std::vector<ToyDataset> PartitionIid(const TaskGenerator& gen, std::size_t clients,
                                            std::size_t per_client, std::uint64_t seed) {
  Require(clients >= 1 && per_client >= 1, ErrorCode::kParameter, "partition sizes must be >= 1");
  const ToyDataset pool = gen.Sample(clients * per_client, seed);
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5DEECE66Dull);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<ToyDataset> parts;
  for (std::size_t c = 0; c < clients; ++c) {
    parts.push_back(pool.Rows(std::span<const std::size_t>(order).subspan(c * per_client, per_client)));
  }
  return parts;
}

// CSV layout: x0..x{d_in-1}, then y0..y{d_out-1}, then `label` for
// classification. Values use max_digits10 so files reload exactly.
inline void WriteDatasetCsv(const ToyDataset& d, const std::string& path) {
  std::ofstream out(path);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path);
  out.precision(17);
  for (Eigen::Index k = 0; k < d.inputs.cols(); ++k) out << (k ? "," : "") << "x" << k;
  for (Eigen::Index k = 0; k < d.targets.cols(); ++k) out << ",y" << k;
  if (d.task == Task::kClassification) out << ",label";
  out << "\n";
  for (Eigen::Index i = 0; i < d.inputs.rows(); ++i) {
    for (Eigen::Index k = 0; k < d.inputs.cols(); ++k) out << (k ? "," : "") << d.inputs(i, k);
    for (Eigen::Index k = 0; k < d.targets.cols(); ++k) out << "," << d.targets(i, k);
    if (d.task == Task::kClassification) out << "," << d.labels[static_cast<std::size_t>(i)];
    out << "\n";
  }
}

inline ToyDataset ReadDatasetCsv(const std::string& path) {
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot read " + path);
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)), ErrorCode::kFormat, path + ": missing header");
  int d_in = 0, d_out = 0;
  bool has_label = false;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (col == "label") {
        has_label = true;
      } else if (!col.empty() && col[0] == 'x') {
        ++d_in;
      } else if (!col.empty() && col[0] == 'y') {
        ++d_out;
      } else {
        Fail(ErrorCode::kFormat, path + ": unexpected column '" + col + "'");
      }
    }
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        Fail(ErrorCode::kFormat, path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    Require(row.size() == static_cast<std::size_t>(d_in + d_out + (has_label ? 1 : 0)), ErrorCode::kFormat,
            path + ":" + std::to_string(line_no) + ": wrong column count");
    rows.push_back(std::move(row));
  }
  ToyDataset d;
  d.task = has_label ? Task::kClassification : Task::kRegression;
  d.inputs.resize(static_cast<Eigen::Index>(rows.size()), d_in);
  d.targets.resize(static_cast<Eigen::Index>(rows.size()), d_out);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int k = 0; k < d_in; ++k) d.inputs(r, k) = rows[i][static_cast<std::size_t>(k)];
    for (int k = 0; k < d_out; ++k) d.targets(r, k) = rows[i][static_cast<std::size_t>(d_in + k)];
    if (has_label) d.labels.push_back(static_cast<int>(rows[i].back()));
  }
  ValidateDataset(d);
  return d;
}

}  // namespace fedshield::lora

#endif  // FEDSHIELD_LORA_DATASET_HPP_
