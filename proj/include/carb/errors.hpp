#pragma once

#include <stdexcept>
#include <string>

namespace carb {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// core-model
struct MalformedRecord : Error { using Error::Error; };
struct CountMismatch : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct ZeroTotal : Error { using Error::Error; };

// model-gateway
struct BackendUnavailable : Error { using Error::Error; };
struct NotAClassifier : Error { using Error::Error; };
struct LogprobsUnsupported : Error { using Error::Error; };
struct ZeroVector : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };

// judge-protocol
struct WrongArity : Error { using Error::Error; };

// rewards
struct NoAnswerSpan : Error { using Error::Error; };

// grpo-engine
struct GroupTooSmall : Error { using Error::Error; };
struct NonFinite : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct RewardFailure : Error { using Error::Error; };
struct DivergenceDetected : Error { using Error::Error; };

// robustness
struct DegenerateBaseline : Error { using Error::Error; };

// analysis
struct DegenerateInput : Error { using Error::Error; };
struct DegenerateX : Error { using Error::Error; };

// data-pipeline / config
struct ConfigError : Error { using Error::Error; };
struct EmptyPool : Error { using Error::Error; };

}  // namespace carb
