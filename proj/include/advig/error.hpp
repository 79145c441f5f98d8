#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace advig {

/// Base class for all engine errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates an operation precondition or a type
/// invariant (bad dimensions, empty vertex list, zero semi-axis, ...).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// An internal contract was broken (e.g. stepping a swarm whose particles
/// were never evaluated).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

enum class OracleFault { transport, malformed, timeout };

inline const char* to_string(OracleFault f) {
  switch (f) {
    case OracleFault::transport: return "transport";
    case OracleFault::malformed: return "malformed";
    case OracleFault::timeout: return "timeout";
  }
  return "unknown";
}

/// A remote oracle query failed. Failed queries never count against the
/// query ledger.
class OracleError : public Error {
 public:
  OracleError(OracleFault fault, const std::string& msg)
      : Error("oracle error (" + std::string(to_string(fault)) + "): " + msg),
        fault_(fault) {}
  OracleFault fault() const { return fault_; }

 private:
  OracleFault fault_;
};

/// The clean frame's matched objectness is already below the attack
/// threshold, so the target does not count toward the metric denominator.
class TargetNotDetected : public Error {
 public:
  explicit TargetNotDetected(double clean_objectness)
      : Error("target not detected on the clean frame (objectness " +
              std::to_string(clean_objectness) + ")"),
        clean_objectness_(clean_objectness) {}
  double clean_objectness() const { return clean_objectness_; }

 private:
  double clean_objectness_ = 0.0;
};

/// An attack run was aborted by repeated oracle failures. Carries whatever
/// per-iteration trace was accumulated before the abort.
class AbortedRun : public Error {
 public:
  AbortedRun(const std::string& msg, std::vector<double> partial_trace,
             unsigned long long queries)
      : Error(msg), partial_trace_(std::move(partial_trace)), queries_(queries) {}
  const std::vector<double>& partial_trace() const { return partial_trace_; }
  unsigned long long queries() const { return queries_; }

 private:
  std::vector<double> partial_trace_;
  unsigned long long queries_ = 0;
};

/// A referenced run directory, record, or manifest entry does not exist.
class NotFound : public Error {
 public:
  using Error::Error;
};

/// The mock server could not bind its listening address.
class BindError : public Error {
 public:
  using Error::Error;
};

}  // namespace advig
