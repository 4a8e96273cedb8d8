#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace cgm {

// Domain error carrying the originating module and a stable machine-readable
// code (e.g. "graph.semi_directed_cycle"). The CLI maps these to exit code 2.
class DomainError : public std::runtime_error {
 public:
  DomainError(std::string module, std::string code, const std::string& message)
      : std::runtime_error(message), module_(std::move(module)), code_(std::move(code)) {}

  const std::string& module() const noexcept { return module_; }
  const std::string& code() const noexcept { return code_; }

 private:
  std::string module_;
  std::string code_;
};

}  // namespace cgm
