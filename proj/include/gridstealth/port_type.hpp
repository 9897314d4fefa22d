#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

#include "gridstealth/util.hpp"

namespace gridstealth {

// Data format carried by a component port: media format, character or
// sample encoding, and annotation type.
struct PortType {
  std::string media;       // audio/wav, text/plain, graph/ag, ...
  std::string encoding;    // pcm16, utf-8, none, ...
  std::string annotation;  // none, asr-tokens, pos, themes, ...

  auto operator<=>(const PortType&) const = default;
  bool operator==(const PortType&) const = default;

  // "media;encoding;annotation", the port-format metadata serialization.
  std::string to_string() const { return media + ";" + encoding + ";" + annotation; }
};

// Tags are lowercase identifiers built from [a-z0-9] and "/+.-_".
inline bool valid_tag(std::string_view tag) {
  if (tag.empty()) return false;
  for (char c : tag) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '/' || c == '+' ||
              c == '.' || c == '-' || c == '_';
    if (!ok) return false;
  }
  return true;
}

inline bool valid(const PortType& type) {
  return valid_tag(type.media) && valid_tag(type.encoding) && valid_tag(type.annotation);
}

inline std::optional<PortType> parse_port_type(std::string_view text) {
  auto parts = split(text, ';');
  if (parts.size() != 3) return std::nullopt;
  PortType type{trim(parts[0]), trim(parts[1]), trim(parts[2])};
  if (!valid(type)) return std::nullopt;
  return type;
}

}  // namespace gridstealth
