#pragma once

#include <stdexcept>
#include <string>

namespace rpsim {

// Every failure surfaced by the library derives from Error and carries a
// stable machine-readable code, which the service layer puts on the wire.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define RPSIM_DEFINE_ERROR(Name)                                             \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

// case_model
RPSIM_DEFINE_ERROR(SchemaError);
RPSIM_DEFINE_ERROR(CategoryError);
RPSIM_DEFINE_ERROR(ReferenceError);
RPSIM_DEFINE_ERROR(MissingIntervention);

// turn_evaluator / adapters
RPSIM_DEFINE_ERROR(JudgeUnavailable);
RPSIM_DEFINE_ERROR(JudgeMalformed);
RPSIM_DEFINE_ERROR(JudgeOutOfRange);
RPSIM_DEFINE_ERROR(ResponderUnavailable);
RPSIM_DEFINE_ERROR(LeakUnremovable);
RPSIM_DEFINE_ERROR(AdapterError);

// latent_policy / dynamics
RPSIM_DEFINE_ERROR(ArityMismatch);
RPSIM_DEFINE_ERROR(ConfigError);
RPSIM_DEFINE_ERROR(DegenerateData);
RPSIM_DEFINE_ERROR(MissingProbabilities);
RPSIM_DEFINE_ERROR(MissingPrimaryConcern);

// session_runtime
RPSIM_DEFINE_ERROR(SessionClosed);
RPSIM_DEFINE_ERROR(TurnBudgetExhausted);
RPSIM_DEFINE_ERROR(TooEarly);
RPSIM_DEFINE_ERROR(WrongTask);
RPSIM_DEFINE_ERROR(BackendMissing);
RPSIM_DEFINE_ERROR(InvalidProtocol);

// metrics
RPSIM_DEFINE_ERROR(MatcherUnavailable);
RPSIM_DEFINE_ERROR(MissingFindings);
RPSIM_DEFINE_ERROR(StyleJudgeMalformed);
RPSIM_DEFINE_ERROR(EmptyBatch);

#undef RPSIM_DEFINE_ERROR

}  // namespace rpsim
