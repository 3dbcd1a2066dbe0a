//
// Copyright 2026 The dpicl Authors.
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
//

#include "dpicl/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "dpicl/rng.hpp"

namespace dpicl {

DemoRecord ingest_record(DemoRecord raw, std::size_t dimension) {
  const std::string who = "record " + std::to_string(raw.id);
  if (raw.id < 0) throw IngestError(who + ": id must be non-negative");
  if (raw.content.empty()) throw IngestError(who + ": content is empty");
  if (raw.embedding.size() != dimension) {
    throw IngestError(who + ": embedding dimension " +
                      std::to_string(raw.embedding.size()) + " != corpus dimension " +
                      std::to_string(dimension));
  }
  double norm_sq = 0.0;
  for (double x : raw.embedding) {
    if (!std::isfinite(x)) throw IngestError(who + ": non-finite embedding entry");
    norm_sq += x * x;
  }
  if (norm_sq <= 0.0) throw IngestError(who + ": zero embedding vector");
  const double norm = std::sqrt(norm_sq);
  for (double& x : raw.embedding) x /= norm;
  return raw;
}

FlatIndex FlatIndex::build(std::vector<DemoRecord> records) {
  FlatIndex index;
  std::sort(records.begin(), records.end(),
            [](const DemoRecord& a, const DemoRecord& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i > 0 && records[i].id == records[i - 1].id) {
      throw IngestError("record " + std::to_string(records[i].id) + ": duplicate id");
    }
    if (i > 0 && records[i].embedding.size() != records[0].embedding.size()) {
      throw IngestError("record " + std::to_string(records[i].id) +
                        ": inconsistent embedding dimension");
    }
  }
  index.dimension_ = records.empty() ? 0 : records[0].embedding.size();
  index.records_ = std::move(records);
  index.by_id_.reserve(index.records_.size());
  for (std::size_t i = 0; i < index.records_.size(); ++i) {
    index.by_id_.emplace(index.records_[i].id, i);
  }
  return index;
}

const DemoRecord& FlatIndex::record(std::int64_t id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) {
    throw InvalidParameterError("unknown record id " + std::to_string(id));
  }
  return records_[it->second];
}

std::vector<std::int64_t> FlatIndex::all_ids() const {
  std::vector<std::int64_t> ids;
  ids.reserve(records_.size());
  for (const DemoRecord& r : records_) ids.push_back(r.id);
  return ids;
}

std::vector<std::int64_t> RetrievalResult::ids() const {
  std::vector<std::int64_t> out;
  out.reserve(ranked.size());
  for (const ScoredId& s : ranked) out.push_back(s.id);
  return out;
}

RetrievalResult top_k(const FlatIndex& index, const EmbeddingVector& query,
                      int k, const IdSet& active) {
  if (k < 1) throw InvalidParameterError("k must be >= 1");
  if (query.size() != index.dimension() && index.size() > 0) {
    throw InvalidParameterError("query dimension mismatch");
  }
  std::vector<ScoredId> scored;
  scored.reserve(active.size());
  for (const DemoRecord& r : index.records()) {
    if (active.count(r.id) == 0) continue;
    double dot = 0.0;
    const double* q = query.data();
    const double* e = r.embedding.data();
    for (std::size_t i = 0; i < query.size(); ++i) dot += q[i] * e[i];
    scored.push_back({r.id, dot});
  }
  const auto better = [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  };
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k),
                                                 scored.size());
  std::partial_sort(scored.begin(), scored.begin() + take, scored.end(), better);
  scored.resize(take);
  return RetrievalResult{std::move(scored)};
}

std::vector<std::int64_t> ShardPlan::all_ids() const {
  std::vector<std::int64_t> out;
  for (const auto& batch : batches) out.insert(out.end(), batch.begin(), batch.end());
  return out;
}

ShardPlan round_robin_shards(std::span<const std::int64_t> ids, int num_shards) {
  if (num_shards < 1) throw InvalidParameterError("num_shards must be >= 1");
  ShardPlan plan;
  plan.batches.resize(static_cast<std::size_t>(num_shards));
  for (std::size_t rank = 0; rank < ids.size(); ++rank) {
    plan.batches[rank % static_cast<std::size_t>(num_shards)].push_back(ids[rank]);
  }
  return plan;
}

ShardPlan partition_shards(const RetrievalResult& result, int num_shards,
                           int n_shot) {
  if (num_shards < 1 || n_shot < 0) {
    throw InvalidParameterError("num_shards must be >= 1 and n_shot >= 0");
  }
  const std::size_t expected =
      static_cast<std::size_t>(num_shards) * static_cast<std::size_t>(n_shot);
  if (result.ranked.size() != expected) {
    throw PartitionError("retrieval returned " + std::to_string(result.ranked.size()) +
                         " records, expected " + std::to_string(expected));
  }
  const std::vector<std::int64_t> ids = result.ids();
  return round_robin_shards(ids, num_shards);
}

ShardPlan poisson_sample(const FlatIndex& index, SamplingConfig sampling,
                         int num_shards, int n_shot, std::uint64_t seed) {
  if (!(sampling.gamma >= 0.0 && sampling.gamma <= 1.0)) {
    throw InvalidParameterError("gamma must lie in [0, 1]");
  }
  if (num_shards < 1 || n_shot < 0) {
    throw InvalidParameterError("num_shards must be >= 1 and n_shot >= 0");
  }
  Rng rng(seed);
  std::vector<std::int64_t> sampled;
  for (const DemoRecord& r : index.records()) {
    if (rng.uniform01() < sampling.gamma) sampled.push_back(r.id);
  }
  // uniform shard assignment: shuffle, truncate to capacity, deal round-robin
  for (std::size_t i = sampled.size(); i > 1; --i) {
    std::swap(sampled[i - 1], sampled[rng.below(i)]);
  }
  const std::size_t capacity =
      static_cast<std::size_t>(num_shards) * static_cast<std::size_t>(n_shot);
  if (sampled.size() > capacity) sampled.resize(capacity);
  return round_robin_shards(sampled, num_shards);
}

namespace {

DemoRecord parse_record_json(const nlohmann::json& j, std::size_t line_no) {
  const std::string where = "line " + std::to_string(line_no);
  if (!j.is_object()) throw IngestError(where + ": expected a JSON object");
  for (const std::string key : {"id", "content", "answer", "embedding"}) {
    if (!j.contains(key)) throw IngestError(where + ": missing key '" + key + "'");
  }
  DemoRecord r;
  if (!j["id"].is_number_integer()) throw IngestError(where + ": id must be an integer");
  r.id = j["id"].get<std::int64_t>();
  r.content = j["content"].get<std::string>();
  if (j.contains("question") && !j["question"].is_null()) {
    r.question = j["question"].get<std::string>();
  }
  r.answer = j["answer"].get<std::string>();
  if (!j["embedding"].is_array()) {
    throw IngestError(where + ": embedding must be an array");
  }
  r.embedding = j["embedding"].get<std::vector<double>>();
  return r;
}

}  // namespace

Corpus load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open corpus file " + path);
  std::string line;
  std::size_t line_no = 0;

  Corpus corpus;
  if (!std::getline(in, line)) throw IngestError(path + ": empty corpus file");
  ++line_no;
  try {
    const auto header = nlohmann::json::parse(line);
    if (!header.is_object() || !header.contains("dimension") ||
        !header["dimension"].is_number_integer() ||
        header["dimension"].get<std::int64_t>() < 1) {
      throw IngestError("line 1: expected header {\"dimension\": d}");
    }
    corpus.dimension = header["dimension"].get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("line 1: invalid JSON header: " + std::string(e.what()));
  }

  IdSet seen;
  double min_norm = std::numeric_limits<double>::infinity();
  double max_norm = 0.0;
  double norm_sum = 0.0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IngestError("line " + std::to_string(line_no) + ": invalid JSON: " +
                        std::string(e.what()));
    }
    DemoRecord raw = parse_record_json(j, line_no);
    double norm_sq = 0.0;
    for (double x : raw.embedding) norm_sq += x * x;
    const double norm = std::sqrt(norm_sq);
    DemoRecord rec;
    try {
      rec = ingest_record(std::move(raw), corpus.dimension);
    } catch (const IngestError& e) {
      throw IngestError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(rec.id).second) {
      throw IngestError("line " + std::to_string(line_no) + ": duplicate id " +
                        std::to_string(rec.id));
    }
    min_norm = std::min(min_norm, norm);
    max_norm = std::max(max_norm, norm);
    norm_sum += norm;
    corpus.records.push_back(std::move(rec));
  }
  if (corpus.records.empty()) {
    throw IngestError(path + ": corpus contains no records");
  }
  corpus.min_raw_norm = min_norm;
  corpus.max_raw_norm = max_norm;
  corpus.mean_raw_norm = norm_sum / static_cast<double>(corpus.records.size());
  return corpus;
}

}  // namespace dpicl
