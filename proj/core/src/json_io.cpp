#include "linex/json_io.hpp"

#include <cstdio>
#include <sstream>

namespace linex {

namespace {

Json vec_to_json(const Vec& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vec vec_from_json(const Json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& x : j) v[i++] = x.get<double>();
  require_finite(v, "vec_from_json");
  return v;
}

std::string sense_name(RowSense s) {
  switch (s) {
    case RowSense::LE:
      return "<=";
    case RowSense::EQ:
      return "==";
    case RowSense::GE:
      return ">=";
  }
  return "?";
}

}  // namespace

Json to_json(const Hyperplane& h) {
  return Json{{"a", vec_to_json(h.a)}, {"b", h.b}};
}

Hyperplane hyperplane_from_json(const Json& j) {
  return Hyperplane(vec_from_json(j.at("a")), j.at("b").get<double>());
}

Json norm_to_json(NormKind k) {
  switch (k.family()) {
    case NormFamily::L1:
      return "l1";
    case NormFamily::L2:
      return "l2";
    case NormFamily::Linf:
      return "linf";
    case NormFamily::Lp:
      return Json{{"lp", k.exponent()}};
  }
  return nullptr;
}

NormKind norm_from_json(const Json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "l1") return NormKind::l1();
    if (s == "l2") return NormKind::l2();
    if (s == "linf") return NormKind::linf();
    throw std::invalid_argument("unknown norm: " + s);
  }
  if (j.is_object() && j.contains("lp")) {
    return NormKind::lp(j.at("lp").get<double>());
  }
  throw std::invalid_argument("unknown norm encoding");
}

Json to_json(const ExtractionReport& r) {
  return Json{{"recovered", to_json(r.recovered)},
              {"queries",
               {{"cf", r.queries_cf},
                {"rcf", r.queries_rcf},
                {"factual", r.queries_factual}}},
              {"equivalence_residual", r.equivalence_residual},
              {"degenerate_path", to_string(r.degenerate_path)}};
}

Json to_json(const UncertaintyModel& m) {
  Json rows = Json::array();
  for (const auto& lc : m.linear_constraints) {
    rows.push_back(Json{{"type", "linear"},
                        {"coeff", vec_to_json(lc.coeff)},
                        {"sense", sense_name(lc.sense)}});
  }
  for (const auto& nc : m.norm_constraints) {
    rows.push_back(Json{{"type", "norm_ball"},
                        {"x", vec_to_json(nc.x)},
                        {"rho", nc.rho},
                        {"ball_norm", norm_to_json(nc.ball_norm)},
                        {"side", nc.side}});
  }
  for (const auto& de : m.dualnorm_equalities) {
    rows.push_back(Json{{"type", "dualnorm_equality"},
                        {"x_rcf", vec_to_json(de.x_rcf)},
                        {"rho", de.rho},
                        {"norm2", norm_to_json(de.norm2)},
                        {"label", de.label}});
  }
  for (const auto& sc : m.subgradient_constraints) {
    rows.push_back(Json{{"type", "subgradient"},
                        {"dir", vec_to_json(sc.dir)},
                        {"norm1", norm_to_json(sc.norm1)}});
  }
  return Json{{"kind", to_string(m.kind)},
              {"dim", m.dim},
              {"norm1", norm_to_json(m.norm1)},
              {"strict_rcf", m.strict_rcf},
              {"augmented", m.augmented},
              {"relaxed", m.relaxed},
              {"constraints", rows}};
}

std::string ledger_to_jsonl(const QueryLedger& ledger) {
  std::ostringstream os;
  for (const auto& r : ledger.records()) {
    Json j{{"seq", r.seq},
           {"kind", to_string(r.kind)},
           {"input", vec_to_json(r.input)},
           {"label", r.factual_label_at_input}};
    if (r.kind == QueryKind::Factual) {
      j["output"] = r.output_label;
    } else {
      j["output"] = vec_to_json(r.output_point);
    }
    os << canonical_dump(j) << '\n';
  }
  return os.str();
}

QueryLedger ledger_from_jsonl(const std::string& text) {
  QueryLedger ledger;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const Json j = Json::parse(line);
    QueryRecord r;
    r.kind = query_kind_from_string(j.at("kind").get<std::string>());
    r.input = vec_from_json(j.at("input"));
    r.factual_label_at_input = j.value("label", 0);
    if (r.kind == QueryKind::Factual) {
      r.output_label = j.at("output").get<int>();
      if (r.factual_label_at_input == 0) r.factual_label_at_input = r.output_label;
    } else {
      r.output_point = vec_from_json(j.at("output"));
    }
    ledger.append(std::move(r));
  }
  return ledger;
}

namespace {

void dump_rec(const Json& j, std::string& out, int indent, int depth) {
  auto pad = [&](int d) {
    if (indent > 0) {
      out += '\n';
      out.append(static_cast<std::size_t>(indent) * d, ' ');
    }
  };
  switch (j.type()) {
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // nlohmann sorts keys
        if (!first) out += ',';
        first = false;
        pad(depth + 1);
        out += Json(it.key()).dump();
        out += indent > 0 ? ": " : ":";
        dump_rec(it.value(), out, indent, depth + 1);
      }
      if (!first) pad(depth);
      out += '}';
      break;
    }
    case Json::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        pad(depth + 1);
        dump_rec(v, out, indent, depth + 1);
      }
      if (!first) pad(depth);
      out += ']';
      break;
    }
    case Json::value_t::number_float: {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", j.get<double>());
      out += buf;
      break;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string canonical_dump(const Json& j, int indent) {
  std::string out;
  dump_rec(j, out, indent, 0);
  return out;
}

}  // namespace linex
