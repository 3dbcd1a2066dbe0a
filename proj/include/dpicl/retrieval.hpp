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

#ifndef DPICL_RETRIEVAL_HPP_
#define DPICL_RETRIEVAL_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dpicl/error.hpp"
#include "dpicl/privacy_core.hpp"

namespace dpicl {

// Unit-norm embedding; dimension fixed per corpus (384 for the default
// sentence-embedding model, free for tests).
using EmbeddingVector = std::vector<double>;

// One sensitive demonstration.
struct DemoRecord {
  std::int64_t id = 0;
  std::string content;
  std::optional<std::string> question;
  std::string answer;
  EmbeddingVector embedding;
};

using IdSet = std::unordered_set<std::int64_t>;

// Validates a raw record and rescales its embedding to unit norm. Throws
// IngestError naming the record id on zero/NaN embeddings, dimension
// mismatches, negative ids or empty content.
DemoRecord ingest_record(DemoRecord raw, std::size_t dimension);

// Exact exhaustive-search index. Immutable after build; concurrent reads are
// safe.
class FlatIndex {
 public:
  // Takes ingested records; sorts by id and rejects duplicates.
  static FlatIndex build(std::vector<DemoRecord> records);

  std::size_t size() const { return records_.size(); }
  std::size_t dimension() const { return dimension_; }
  const std::vector<DemoRecord>& records() const { return records_; }
  const DemoRecord& record(std::int64_t id) const;
  bool contains(std::int64_t id) const { return by_id_.count(id) > 0; }
  std::vector<std::int64_t> all_ids() const;

 private:
  FlatIndex() = default;
  std::vector<DemoRecord> records_;  // ascending id
  std::unordered_map<std::int64_t, std::size_t> by_id_;
  std::size_t dimension_ = 0;
};

struct ScoredId {
  std::int64_t id = 0;
  double score = 0.0;
};

// Ranked retrieval output, scores non-increasing, ids distinct.
struct RetrievalResult {
  std::vector<ScoredId> ranked;
  std::vector<std::int64_t> ids() const;
};

// The min(k, |active|) active records with the highest inner product against
// the query; ties broken toward the smaller id. Deterministic.
RetrievalResult top_k(const FlatIndex& index, const EmbeddingVector& query,
                      int k, const IdSet& active);

// Disjoint batches of retrieved demonstrations; one prompt per batch.
struct ShardPlan {
  std::vector<std::vector<std::int64_t>> batches;
  std::vector<std::int64_t> all_ids() const;
};

// Round-robin by rank: batch j takes ranks j, j+M, j+2M, ... so every batch
// sees a comparable quality profile. Requires |result| == num_shards * n_shot.
ShardPlan partition_shards(const RetrievalResult& result, int num_shards,
                           int n_shot);

// Same dealing rule without the exact-size requirement; batches may be ragged
// (down to empty, which degrades that shard to a zero-shot prompt).
ShardPlan round_robin_shards(std::span<const std::int64_t> ids, int num_shards);

// Poisson-sampling baseline retriever: each record enters independently with
// probability gamma, the sample is shuffled, truncated to at most
// num_shards * n_shot, and dealt round-robin. Deterministic given the seed.
ShardPlan poisson_sample(const FlatIndex& index, SamplingConfig sampling,
                         int num_shards, int n_shot, std::uint64_t seed);

// JSON-lines corpus: first line {"dimension": d}, then one record per line
// with keys id, content, question (optional), answer, embedding.
struct Corpus {
  std::size_t dimension = 0;
  std::vector<DemoRecord> records;
  // pre-normalization norm statistics, for index-build reporting
  double min_raw_norm = 0.0;
  double max_raw_norm = 0.0;
  double mean_raw_norm = 0.0;
};

Corpus load_corpus_jsonl(const std::string& path);

}  // namespace dpicl

#endif  // DPICL_RETRIEVAL_HPP_
