#pragma once

#include <stdexcept>
#include <string>

namespace resdehaze {

// Domain-wide constants. t_min and eps_A defaults live here because both the
// physics operations and the networks that wrap them must agree on the floor.
inline constexpr double kDefaultTMin = 0.05;
inline constexpr double kDefaultEpsA = 1e-2;
inline constexpr double kPsnrCap = 100.0;
inline constexpr double kProbEps = 1e-6;

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

// Raised when a non-finite loss value is observed during training.
class TrainingHalt : public std::runtime_error {
 public:
  explicit TrainingHalt(const std::string& term)
      : std::runtime_error("training halted: non-finite value in '" + term + "'"),
        term_(term) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

}  // namespace resdehaze
