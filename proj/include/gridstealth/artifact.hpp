#pragma once

#include <optional>
#include <string>

#include "gridstealth/annotation.hpp"
#include "gridstealth/port_type.hpp"

namespace gridstealth {

// A unit of data moving between components: a dataset, a chunk, a lexicon,
// a transcript, or an annotation graph.
struct Artifact {
  std::string id;  // dataset id; for audio also the signal id
  PortType type;
  double size_mb = 0;
  std::string text;  // textual payload, format depends on the type
  std::optional<annotation::AnnotationGraph> graph;

  bool operator==(const Artifact&) const = default;
};

}  // namespace gridstealth
