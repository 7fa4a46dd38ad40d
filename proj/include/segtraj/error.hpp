#pragma once

#include <stdexcept>
#include <string>

namespace segtraj {

// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (CLI exit code 2).
class ConfigError : public Error {
  public:
    using Error::Error;
};

// A pipeline stage was run before its inputs exist (CLI exit code 3).
class MissingArtifactError : public Error {
  public:
    explicit MissingArtifactError(const std::string& stage)
        : Error("missing artifact from stage '" + stage + "'"), stage_(stage) {}
    const std::string& stage() const { return stage_; }

  private:
    std::string stage_;
};

} // namespace segtraj
