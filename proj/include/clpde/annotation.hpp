#pragma once
// Annotated corpus ingestion, lexicon-driven span extraction and
// inter-annotator agreement.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clpde/graph.hpp"
#include "clpde/json_io.hpp"
#include "clpde/types.hpp"

namespace clpde {

struct AnnotatedSpan {
  std::size_t start = 0;  // Unicode scalar offsets, [start, end)
  std::size_t end = 0;
  AnnotationRecord annotation;

  bool operator==(const AnnotatedSpan&) const = default;
};

struct CorpusRecord {
  std::string raw_text;
  std::vector<AnnotatedSpan> spans;
  std::string language;
  Provenance provenance;

  bool operator==(const CorpusRecord&) const = default;
};

void to_json(Json& j, const AnnotatedSpan& v);
void from_json(const Json& j, AnnotatedSpan& v);
void to_json(Json& j, const CorpusRecord& v);
void from_json(const Json& j, CorpusRecord& v);

struct RecordValidation {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

// Reports every violation, never just the first.
RecordValidation validate_record(const CorpusRecord& record);

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<NodeId> created;       // nodes that did not exist before
  std::vector<std::string> errors;   // "record N: ..." for each rejection

  bool operator==(const IngestReport&) const = default;
};

void to_json(Json& j, const IngestReport& v);

// Each valid span becomes an expression node; invalid records are counted
// and skipped. Re-ingesting the same records creates nothing new.
IngestReport ingest_corpus(OntologyGraph& graph, std::span<const CorpusRecord> records);

// JSON Lines input. Unparseable lines are rejected records; a stream that
// fails to read throws IoError carrying the number of records processed.
IngestReport ingest_corpus(OntologyGraph& graph, std::istream& jsonl);

// Parses JSON Lines into records, collecting line-level errors.
struct ParsedCorpus {
  std::vector<std::pair<std::size_t, CorpusRecord>> records;  // (line number, record)
  std::vector<std::string> errors;
};
ParsedCorpus parse_corpus(std::istream& jsonl);

struct TextSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string phrase;

  bool operator==(const TextSpan&) const = default;
};

// Non-overlapping leftmost-longest occurrences of lexicon phrases, bounded by
// separators or text edges.
std::vector<TextSpan> extract_expressions(std::string_view raw_text,
                                          const std::vector<std::string>& lexicon);

// Cohen's kappa over two aligned label lists.
double cohen_kappa(std::span<const std::string> labels_a, std::span<const std::string> labels_b);

inline constexpr double kKappaTarget = 0.7;

struct AgreementReport {
  double kappa = 0.0;
  std::size_t item_count = 0;
  std::vector<std::pair<std::string, std::string>> annotator_pairs;
  std::map<std::string, double> per_pair_kappa;  // "a|b" -> kappa

  bool meets_target(double target = kKappaTarget) const { return kappa > target; }
};

void to_json(Json& j, const AgreementReport& v);

// Pairwise kappa for every annotator pair; the headline kappa is their
// unweighted mean. Names default to "a0", "a1", ...
AgreementReport agreement_report(const std::vector<std::vector<std::string>>& labelings,
                                 std::vector<std::string> annotator_names = {});

}  // namespace clpde
