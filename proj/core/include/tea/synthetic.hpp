#pragma once

#include <string>

#include "tea/gateway.hpp"

namespace tea::gateway {

// Offline stand-in for a model. Reads the shipped prompt markers and answers
// with well-formed, deterministic text for each pipeline stage. Generated
// scene code sometimes carries a "# stub-error: <message>" line that the stub
// renderer turns into a failed run, so the repair loop gets exercised.
class SyntheticResponder final : public Responder {
 public:
  // failure_per_mille: share of first-attempt scripts carrying a stub error.
  explicit SyntheticResponder(int failure_per_mille = 400);
  std::string respond(const ChatRequest& request) override;

 private:
  int failure_per_mille_;
};

}  // namespace tea::gateway
