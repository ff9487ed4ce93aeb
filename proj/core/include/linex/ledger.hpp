#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "linex/norms.hpp"

namespace linex {

enum class QueryKind { Factual, Counterfactual, RobustCounterfactual };

std::string to_string(QueryKind k);
QueryKind query_kind_from_string(const std::string& s);

/// One oracle interaction. Factual records carry output_label; CF/RCF records
/// carry output_point. factual_label_at_input is the classifier's label of
/// the queried input (0 when unknown), which region certification needs to
/// split records into the 'No'/'Yes' index sets.
struct QueryRecord {
  int seq = 0;
  QueryKind kind = QueryKind::Factual;
  Vec input;
  Vec output_point;
  int output_label = 0;
  int factual_label_at_input = 0;
};

/// Ordered, append-only record of all queries in one attack or scenario run.
/// Single-writer: one ledger per run.
class QueryLedger {
 public:
  void append(QueryRecord r) {
    r.seq = static_cast<int>(records_.size());
    records_.push_back(std::move(r));
  }
  const std::vector<QueryRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  int count(QueryKind k) const {
    int n = 0;
    for (const auto& r : records_) n += (r.kind == k) ? 1 : 0;
    return n;
  }

 private:
  std::vector<QueryRecord> records_;
};

}  // namespace linex
