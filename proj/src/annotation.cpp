#include "clpde/annotation.hpp"

#include <istream>
#include <set>
#include <tuple>

#include "clpde/error.hpp"
#include "clpde/text.hpp"

namespace clpde {

void to_json(Json& j, const AnnotatedSpan& v) {
  j = Json{{"start", v.start}, {"end", v.end}, {"annotation", v.annotation}};
}

void from_json(const Json& j, AnnotatedSpan& v) {
  v.start = j.at("start").get<std::size_t>();
  v.end = j.at("end").get<std::size_t>();
  v.annotation = j.at("annotation").get<AnnotationRecord>();
}

void to_json(Json& j, const CorpusRecord& v) {
  j = Json{{"raw_text", v.raw_text},
           {"spans", v.spans},
           {"language", v.language},
           {"provenance", v.provenance}};
}

void from_json(const Json& j, CorpusRecord& v) {
  v.raw_text = j.at("raw_text").get<std::string>();
  v.spans = j.at("spans").get<std::vector<AnnotatedSpan>>();
  v.language = j.at("language").get<std::string>();
  v.provenance = j.at("provenance").get<Provenance>();
}

void to_json(Json& j, const IngestReport& v) {
  j = Json{{"accepted", v.accepted},
           {"rejected", v.rejected},
           {"created", v.created},
           {"errors", v.errors}};
}

void to_json(Json& j, const AgreementReport& v) {
  Json pairs = Json::array();
  for (const auto& [a, b] : v.annotator_pairs) pairs.push_back(Json::array({a, b}));
  j = Json{{"kappa", v.kappa},
           {"item_count", v.item_count},
           {"annotator_pairs", std::move(pairs)},
           {"per_pair_kappa", v.per_pair_kappa},
           {"meets_target", v.meets_target()}};
}

RecordValidation validate_record(const CorpusRecord& record) {
  RecordValidation result;
  auto& errors = result.errors;

  std::size_t length = 0;
  bool text_ok = true;
  try {
    length = text::scalar_length(record.raw_text);
  } catch (const ValidationError& e) {
    errors.push_back(std::string("raw_text: ") + e.what());
    text_ok = false;
  }
  if (text_ok && length == 0) errors.push_back("raw_text is empty");
  if (text::trim(record.language).empty()) errors.push_back("language tag is empty");
  if (record.provenance.source_kind != SourceKind::synthetic && !record.provenance.anonymized) {
    errors.push_back("provenance '" + record.provenance.source_id + "' is not anonymized");
  }
  if (record.spans.empty()) errors.push_back("record has no spans");

  std::set<std::tuple<std::size_t, std::size_t, std::string>> seen;
  for (std::size_t i = 0; i < record.spans.size(); ++i) {
    const auto& span = record.spans[i];
    const std::string where = "spans[" + std::to_string(i) + "] [" + std::to_string(span.start) +
                              "," + std::to_string(span.end) + ")";
    if (span.start >= span.end) {
      errors.push_back(where + ": start must be below end");
    } else if (text_ok && span.end > length) {
      errors.push_back(where + ": end exceeds text length " + std::to_string(length));
    } else if (text_ok &&
               text::trim(text::scalar_substr(record.raw_text, span.start, span.end)).empty()) {
      errors.push_back(where + ": span covers only whitespace");
    }
    for (const auto& v : annotation_violations(span.annotation)) {
      errors.push_back(where + ": " + v);
    }
    if (!seen.emplace(span.start, span.end, span.annotation.annotator_id).second) {
      errors.push_back(where + ": duplicate span for annotator '" +
                       span.annotation.annotator_id + "'");
    }
  }
  return result;
}

namespace {

void ingest_one(OntologyGraph& graph, const CorpusRecord& record, const std::string& label,
                IngestReport& report) {
  const auto validation = validate_record(record);
  if (!validation.ok()) {
    ++report.rejected;
    for (const auto& e : validation.errors) report.errors.push_back(label + ": " + e);
    return;
  }
  for (const auto& span : record.spans) {
    const std::size_t before = graph.expressions().size();
    const NodeId id = graph.add_expression(
        text::scalar_substr(record.raw_text, span.start, span.end), record.language,
        span.annotation, record.provenance, NodeStatus::active);
    if (graph.expressions().size() > before) report.created.push_back(id);
  }
  ++report.accepted;
}

}  // namespace

IngestReport ingest_corpus(OntologyGraph& graph, std::span<const CorpusRecord> records) {
  IngestReport report;
  for (std::size_t i = 0; i < records.size(); ++i) {
    ingest_one(graph, records[i], "record " + std::to_string(i + 1), report);
  }
  return report;
}

ParsedCorpus parse_corpus(std::istream& in) {
  ParsedCorpus parsed;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      parsed.records.emplace_back(line_no, Json::parse(line).get<CorpusRecord>());
    } catch (const std::exception& e) {
      parsed.errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (in.bad()) {
    throw IoError("corpus stream failed after line " + std::to_string(line_no),
                  parsed.records.size() + parsed.errors.size());
  }
  return parsed;
}

IngestReport ingest_corpus(OntologyGraph& graph, std::istream& jsonl) {
  const ParsedCorpus parsed = parse_corpus(jsonl);
  IngestReport report;
  report.rejected = parsed.errors.size();
  report.errors = parsed.errors;
  for (const auto& [line, record] : parsed.records) {
    ingest_one(graph, record, "line " + std::to_string(line), report);
  }
  return report;
}

std::vector<TextSpan> extract_expressions(std::string_view raw_text,
                                          const std::vector<std::string>& lexicon) {
  std::vector<std::u32string> phrases;
  for (const auto& p : lexicon) {
    if (p.empty()) throw ValidationError("lexicon phrase is empty");
    phrases.push_back(text::decode_utf8(text::nfc(p)));
  }
  const std::u32string t = text::decode_utf8(text::nfc(raw_text));
  std::vector<TextSpan> out;
  auto boundary_before = [&](std::size_t i) { return i == 0 || text::is_separator(t[i - 1]); };
  auto boundary_after = [&](std::size_t i) { return i == t.size() || text::is_separator(t[i]); };

  std::size_t i = 0;
  while (i < t.size()) {
    std::size_t best = 0;
    if (boundary_before(i)) {
      for (const auto& p : phrases) {
        if (p.size() > best && i + p.size() <= t.size() && t.compare(i, p.size(), p) == 0 &&
            boundary_after(i + p.size())) {
          best = p.size();
        }
      }
    }
    if (best > 0) {
      out.push_back({i, i + best, text::encode_utf8(std::u32string_view(t).substr(i, best))});
      i += best;
    } else {
      ++i;
    }
  }
  return out;
}

double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() != b.size()) {
    throw ValidationError("label lists differ in length (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw ValidationError("label lists are empty");
  const double n = static_cast<double>(a.size());
  std::map<std::string_view, double> count_a, count_b;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    count_a[a[i]] += 1.0;
    count_b[b[i]] += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  const double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [label, ca] : count_a) {
    if (auto it = count_b.find(label); it != count_b.end()) p_e += (ca / n) * (it->second / n);
  }
  // p_e == 1 only when both annotators used one shared label throughout.
  if (p_e >= 1.0) return 1.0;
  return (p_o - p_e) / (1.0 - p_e);
}

AgreementReport agreement_report(const std::vector<std::vector<std::string>>& labelings,
                                 std::vector<std::string> names) {
  if (labelings.size() < 2) {
    throw ValidationError("agreement needs at least two annotators, got " +
                          std::to_string(labelings.size()));
  }
  if (names.empty()) {
    for (std::size_t i = 0; i < labelings.size(); ++i) names.push_back("a" + std::to_string(i));
  }
  if (names.size() != labelings.size()) {
    throw ValidationError("annotator name count does not match labelings");
  }
  const std::size_t n = labelings.front().size();
  for (const auto& l : labelings) {
    if (l.size() != n) throw ValidationError("labelings differ in length");
  }
  if (n == 0) throw ValidationError("labelings are empty");

  AgreementReport report;
  report.item_count = n;
  double sum = 0.0;
  for (std::size_t i = 0; i < labelings.size(); ++i) {
    for (std::size_t j = i + 1; j < labelings.size(); ++j) {
      const double k = cohen_kappa(labelings[i], labelings[j]);
      report.annotator_pairs.emplace_back(names[i], names[j]);
      report.per_pair_kappa[names[i] + "|" + names[j]] = k;
      sum += k;
    }
  }
  report.kappa = sum / static_cast<double>(report.annotator_pairs.size());
  return report;
}

}  // namespace clpde
