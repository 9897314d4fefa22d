#pragma once

// Minimal XML document model on top of expat, plus a canonical writer.
// Every file format in the library (records, repositories, catalogs,
// application specs, graphs, topologies) goes through these two pieces.

#include <expat.h>

#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridstealth/error.hpp"
#include "gridstealth/util.hpp"

namespace gridstealth::xml {

struct Element {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;  // document order
  std::vector<Element> children;
  std::string text;  // concatenated character data, untrimmed
  int line = 0;

  const std::string* attr(std::string_view key) const {
    for (const auto& [k, v] : attributes)
      if (k == key) return &v;
    return nullptr;
  }

  std::string attr_or(std::string_view key, std::string fallback) const {
    const auto* v = attr(key);
    return v ? *v : std::move(fallback);
  }

  bool has_attr(std::string_view key) const { return attr(key) != nullptr; }
};

namespace detail {

struct ParseState {
  XML_Parser parser = nullptr;
  Element root;
  bool has_root = false;
  std::vector<Element*> stack;
};

inline void on_start(void* user, const XML_Char* name, const XML_Char** atts) {
  auto* state = static_cast<ParseState*>(user);
  Element element;
  element.name = name;
  element.line = static_cast<int>(XML_GetCurrentLineNumber(state->parser));
  for (int i = 0; atts[i] != nullptr; i += 2)
    element.attributes.emplace_back(atts[i], atts[i + 1]);
  if (state->stack.empty()) {
    state->root = std::move(element);
    state->has_root = true;
    state->stack.push_back(&state->root);
  } else {
    auto& siblings = state->stack.back()->children;
    siblings.push_back(std::move(element));
    state->stack.push_back(&siblings.back());
  }
}

inline void on_end(void* user, const XML_Char*) {
  static_cast<ParseState*>(user)->stack.pop_back();
}

inline void on_text(void* user, const XML_Char* s, int len) {
  auto* state = static_cast<ParseState*>(user);
  if (!state->stack.empty()) state->stack.back()->text.append(s, static_cast<std::size_t>(len));
}

}  // namespace detail

// Throws Error{"malformed-xml"} with the expat line on failure.
inline Element parse(std::string_view document) {
  detail::ParseState state;
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
      XML_ParserCreate("UTF-8"), &XML_ParserFree);
  state.parser = parser.get();
  XML_SetUserData(parser.get(), &state);
  XML_SetElementHandler(parser.get(), detail::on_start, detail::on_end);
  XML_SetCharacterDataHandler(parser.get(), detail::on_text);
  if (XML_Parse(parser.get(), document.data(), static_cast<int>(document.size()), XML_TRUE) ==
      XML_STATUS_ERROR) {
    Diagnostic d{"malformed-xml", "", XML_ErrorString(XML_GetErrorCode(parser.get())),
                 static_cast<int>(XML_GetCurrentLineNumber(parser.get()))};
    throw Error(Diagnostics{d});
  }
  if (!state.has_root) throw Error("malformed-xml", "", "empty document");
  return std::move(state.root);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io-error", path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io-error", path, "cannot write file");
  out << content;
}

inline Element parse_file(const std::string& path) { return parse(read_file(path)); }

inline std::string escape(std::string_view text, bool attribute) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"':
        if (attribute) out += "&quot;"; else out += c;
        break;
      case '\n':
        if (attribute) out += "&#10;"; else out += c;
        break;
      case '\t':
        if (attribute) out += "&#9;"; else out += c;
        break;
      default: out += c;
    }
  }
  return out;
}

using Attributes = std::vector<std::pair<std::string, std::string>>;

// Streaming writer with a fixed layout: UTF-8 declaration, one element per
// line, two-space indentation, attributes in the order given by the caller.
class Writer {
 public:
  Writer() { out_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"; }

  Writer& open(std::string_view name, const Attributes& attributes = {}) {
    start_tag(name, attributes);
    out_ << ">\n";
    ++depth_;
    return *this;
  }

  Writer& close(std::string_view name) {
    --depth_;
    indent();
    out_ << "</" << name << ">\n";
    return *this;
  }

  Writer& empty(std::string_view name, const Attributes& attributes = {}) {
    start_tag(name, attributes);
    out_ << "/>\n";
    return *this;
  }

  Writer& text_element(std::string_view name, const Attributes& attributes,
                       std::string_view text) {
    start_tag(name, attributes);
    out_ << ">" << escape(text, false) << "</" << name << ">\n";
    return *this;
  }

  std::string str() const { return out_.str(); }

 private:
  void indent() {
    for (int i = 0; i < depth_; ++i) out_ << "  ";
  }

  void start_tag(std::string_view name, const Attributes& attributes) {
    indent();
    out_ << "<" << name;
    for (const auto& [k, v] : attributes) out_ << " " << k << "=\"" << escape(v, true) << "\"";
  }

  std::ostringstream out_;
  int depth_ = 0;
};

}  // namespace gridstealth::xml
