#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gmm {

/// Thrown by the moment-matching search when no candidate passes the accept
/// test; carries the best discrepancy seen so the caller can diagnose.
class NoCandidateError : public std::runtime_error {
 public:
  NoCandidateError(const std::string& what, double best)
      : std::runtime_error(what), best_discrepancy(best) {}
  double best_discrepancy;
};

class ConsensusFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ClassCountMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A class matched zero or more than one counterpart across directions.
class AmbiguousMatching : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShiftBudgetExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A clustering-lemma hypothesis failed; `detail` names the offending pair.
class HypothesisViolated : public std::runtime_error {
 public:
  HypothesisViolated(const std::string& what, std::string d)
      : std::runtime_error(what), detail(std::move(d)) {}
  std::string detail;
};

class InternalCaseFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientSplit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParamsUnderflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxMomentOrder = 64;

}  // namespace gmm
