#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mmcell {

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Raised when input parses but breaks one or more invariants; carries every
/// offending entity, not only the first.
class ValidationError : public Error
{
public:
  explicit ValidationError(std::vector<std::string> issues)
    : Error(join(issues)), issues_(std::move(issues))
  {
  }

  const std::vector<std::string>& issues() const { return issues_; }

private:
  static std::string join(const std::vector<std::string>& issues)
  {
    std::string msg;
    for (const auto& s : issues)
    {
      if (!msg.empty())
        msg += "; ";
      msg += s;
    }
    return msg;
  }

  std::vector<std::string> issues_;
};

} // namespace mmcell
