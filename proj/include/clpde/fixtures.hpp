#pragma once
// Deterministic fixtures shared by tests, the acceptance suite and the
// simulate endpoint.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "clpde/alignment.hpp"
#include "clpde/graph.hpp"

namespace clpde {
class Engine;
}

namespace clpde::fixtures {

// 2025-01-01T00:00:00Z.
Timestamp epoch();

// Clock starting at epoch() and advancing one minute per reading.
std::function<Timestamp()> stepping_clock();

// Two clusters of five expressions in each of hi, kn and mr. Members of a
// cluster share eight core tokens across languages plus one token of their
// own. Cluster 0 maps to 6B00, cluster 1 to 6A70, through Accepted edges.
struct PlantedClusters {
  OntologyGraph graph;
  EmbeddingStore store;
  std::string provider_id;
  std::map<NodeId, int> cluster_of;
  std::vector<std::string> languages;
};

const PlantedClusters& planted_clusters();

// 100 annotated expressions with two concept candidates each. Scores are
// uniform on [0.02, 0.98] and each candidate is true with probability equal
// to its score, drawn from a fixed seed.
struct SimulationFixture {
  OntologyGraph graph;
  EmbeddingStore store;
  std::vector<CandidateEdge> candidates;
  std::set<std::string> truth;
};

const SimulationFixture& simulation_fixture();

// In-memory engine driven through ingest, proposal, validation, adjudication
// (including parallel retention), revision, alignment and explanation.
std::unique_ptr<Engine> demo_engine();

}  // namespace clpde::fixtures
