#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gridstealth {

// A single finding: validation violations, parse errors, resolver findings.
// `code` is a stable kebab-case tag; `subject` names the offending entity.
struct Diagnostic {
  std::string code;
  std::string subject;
  std::string message;
  int line = 0;  // 1-based source line, 0 when not applicable

  // "code" or "code:subject", the short form used in reports and tests.
  std::string tag() const {
    return subject.empty() ? code : code + ":" + subject;
  }

  std::string to_string() const {
    std::string out = tag();
    if (line > 0) out += " (line " + std::to_string(line) + ")";
    if (!message.empty()) out += ": " + message;
    return out;
  }

  bool operator==(const Diagnostic&) const = default;
};

using Diagnostics = std::vector<Diagnostic>;

inline std::vector<std::string> tags(const Diagnostics& diagnostics) {
  std::vector<std::string> out;
  out.reserve(diagnostics.size());
  for (const auto& d : diagnostics) out.push_back(d.tag());
  return out;
}

// Hard failure of an operation. Carries the diagnostics that caused it.
class Error : public std::runtime_error {
 public:
  Error(std::string code, std::string subject, std::string message = {})
      : Error(Diagnostics{Diagnostic{std::move(code), std::move(subject),
                                     std::move(message), 0}}) {}

  explicit Error(Diagnostics diagnostics)
      : std::runtime_error(summarize(diagnostics)),
        diagnostics_(std::move(diagnostics)) {}

  const std::string& code() const { return diagnostics_.front().code; }
  const std::string& subject() const { return diagnostics_.front().subject; }
  const Diagnostics& diagnostics() const { return diagnostics_; }

 private:
  static std::string summarize(const Diagnostics& diagnostics) {
    if (diagnostics.empty()) return "unknown error";
    std::string out;
    for (const auto& d : diagnostics) {
      if (!out.empty()) out += "; ";
      out += d.to_string();
    }
    return out;
  }

  Diagnostics diagnostics_;
};

}  // namespace gridstealth
