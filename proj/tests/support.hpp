#pragma once
// Helpers and independent oracles shared by the unit and acceptance tests.
// Oracles avoid the library's own helpers so a bug there cannot hide.

#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "clpde/alignment.hpp"
#include "clpde/annotation.hpp"
#include "clpde/graph.hpp"
#include "clpde/text.hpp"

namespace testsupport {

inline clpde::Provenance prov(const std::string& id = "test") {
  clpde::Provenance p;
  p.source_kind = clpde::SourceKind::synthetic;
  p.source_id = id;
  p.collected_at = clpde::text::parse_timestamp("2025-01-01T00:00:00Z");
  p.anonymized = true;
  return p;
}

inline clpde::AnnotationRecord ann(clpde::SemanticCategory c = clpde::SemanticCategory::emotion) {
  clpde::AnnotationRecord a;
  a.semantic_category = c;
  a.annotator_confidence = 0.9;
  a.annotator_id = "tester";
  return a;
}

// Contingency table over the union alphabet, then (po - pe) / (1 - pe).
inline double kappa_oracle(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> labels(a.begin(), a.end());
  labels.insert(b.begin(), b.end());
  std::vector<std::string> alphabet(labels.begin(), labels.end());
  const std::size_t m = alphabet.size();
  std::vector<std::vector<double>> table(m, std::vector<double>(m, 0.0));
  auto index = [&](const std::string& s) {
    for (std::size_t i = 0; i < m; ++i)
      if (alphabet[i] == s) return i;
    return m;
  };
  for (std::size_t i = 0; i < a.size(); ++i) table[index(a[i])][index(b[i])] += 1.0;
  const double n = static_cast<double>(a.size());
  double po = 0.0, pe = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    po += table[i][i] / n;
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      row += table[i][j];
      col += table[j][i];
    }
    pe += (row / n) * (col / n);
  }
  if (pe == 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

inline double cosine_oracle(const std::vector<double>& u, const std::vector<double>& v) {
  long double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<long double>(u[i]) * v[i];
    nu += static_cast<long double>(u[i]) * u[i];
    nv += static_cast<long double>(v[i]) * v[i];
  }
  if (nu == 0 || nv == 0) return 0.0;
  return static_cast<double>(dot / std::sqrt(nu * nv));
}

// Embedding of a token list computed straight from the provider's per-token
// vectors: sum then L2-normalize.
inline std::vector<double> embed_oracle(const clpde::HashedTokenProvider& p,
                                        const std::vector<std::string>& tokens) {
  std::vector<double> sum(p.dim(), 0.0);
  for (const auto& t : tokens) {
    const auto v = p.token_vector(t);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += v[i];
  }
  double n = 0.0;
  for (double x : sum) n += x * x;
  n = std::sqrt(n);
  if (n > 0)
    for (double& x : sum) x /= n;
  return sum;
}

// score_i = cos(all, c) - cos(all minus token i, c); empty remainder is 0.
inline std::vector<double> loo_oracle(const clpde::HashedTokenProvider& p,
                                      const std::vector<std::string>& tokens,
                                      const std::vector<std::string>& counterpart) {
  const auto c = embed_oracle(p, counterpart);
  const double full = cosine_oracle(embed_oracle(p, tokens), c);
  std::vector<double> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::vector<std::string> rest;
    for (std::size_t j = 0; j < tokens.size(); ++j)
      if (j != i) rest.push_back(tokens[j]);
    const double without = rest.empty() ? 0.0 : cosine_oracle(embed_oracle(p, rest), c);
    out.push_back(full - without);
  }
  return out;
}

struct ConnectivityOracle {
  std::size_t components = 0;
  double mean_degree = 0.0;
  double isolated_ratio = 0.0;
  double coverage = 0.0;
};

// Union-find over live edges; coverage by fixed-point iteration over
// Accepted edges.
inline ConnectivityOracle connectivity_oracle(const clpde::OntologyGraph& g) {
  using clpde::EdgeStatus;
  ConnectivityOracle out;
  std::vector<std::string> ids;
  for (const auto& [id, _] : g.expressions()) ids.push_back(id);
  for (const auto& [id, _] : g.concepts()) ids.push_back(id);
  if (ids.empty()) return out;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;
  std::vector<std::size_t> parent(ids.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  std::vector<std::size_t> degree(ids.size(), 0);
  for (const auto& [_, e] : g.edges()) {
    if (e.status == EdgeStatus::Rejected || e.status == EdgeStatus::Superseded) continue;
    const auto a = index.at(e.src), b = index.at(e.dst);
    ++degree[a];
    ++degree[b];
    parent[find(a)] = find(b);
  }
  std::set<std::size_t> roots;
  std::size_t degree_sum = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    roots.insert(find(i));
    degree_sum += degree[i];
  }
  out.components = roots.size();
  out.mean_degree = static_cast<double>(degree_sum) / static_cast<double>(ids.size());
  const std::size_t n_expr = g.expressions().size();
  if (n_expr == 0) return out;
  std::size_t isolated = 0;
  for (const auto& [id, _] : g.expressions())
    if (degree[index.at(id)] == 0) ++isolated;
  out.isolated_ratio = static_cast<double>(isolated) / static_cast<double>(n_expr);
  std::set<std::string> reached;
  for (const auto& [id, _] : g.concepts()) reached.insert(id);
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& [_, e] : g.edges()) {
      if (e.status != EdgeStatus::Accepted) continue;
      if (reached.count(e.src) != reached.count(e.dst)) {
        reached.insert(e.src);
        reached.insert(e.dst);
        grew = true;
      }
    }
  }
  std::size_t covered = 0;
  for (const auto& [id, _] : g.expressions()) covered += reached.count(id);
  out.coverage = static_cast<double>(covered) / static_cast<double>(n_expr);
  return out;
}

// Flat list of (concept, expression) memberships; every pair of entries with
// distinct expressions counts as intra when the concepts match, else inter.
inline std::optional<double> coherence_oracle(const clpde::OntologyGraph& g,
                                              const clpde::EmbeddingStore& store,
                                              const std::string& provider_id) {
  std::set<std::pair<std::string, std::string>> members;
  for (const auto& [_, e] : g.edges()) {
    if (e.edge_type == clpde::EdgeType::ExpressionConcept && e.status == clpde::EdgeStatus::Accepted)
      members.insert({e.dst, e.src});
  }
  const std::vector<std::pair<std::string, std::string>> flat(members.begin(), members.end());
  long double intra = 0, inter = 0;
  std::size_t ni = 0, nx = 0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    for (std::size_t j = i + 1; j < flat.size(); ++j) {
      if (flat[i].second == flat[j].second) continue;
      const double c = cosine_oracle(*store.find(provider_id, flat[i].second),
                                     *store.find(provider_id, flat[j].second));
      if (flat[i].first == flat[j].first) {
        intra += c;
        ++ni;
      } else {
        inter += c;
        ++nx;
      }
    }
  }
  if (ni == 0 || nx == 0) return std::nullopt;
  return static_cast<double>(intra / ni - inter / nx);
}

inline std::string random_word(std::mt19937_64& rng) {
  static const char* syllables[] = {"ma", "na", "ka", "dil", "bho", "ja", "ra", "tha",
                                    "shi", "gha", "bra", "hat", "pa", "si", "lu", "ne"};
  std::uniform_int_distribution<int> len(1, 3), pick(0, 15);
  std::string w;
  for (int i = len(rng); i > 0; --i) w += syllables[pick(rng)];
  return w;
}

}  // namespace testsupport
