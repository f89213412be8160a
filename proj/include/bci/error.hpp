#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bci {

// Every failure the engine can raise. The grouping below is what the CLI
// maps onto exit codes (see exit_code_for).
enum class ErrorKind {
    // acquisition
    BadHeader,
    BadFooter,
    ShortPacket,
    ScheduleGap,
    SourceUnavailable,
    DesyncDetected,
    Overflow,
    SourceLost,
    // signal
    InvalidBand,
    UnstableDesign,
    // features / dataset
    EmptyTrainingSet,
    EmptyDataset,
    FormatVersionMismatch,
    CorruptFile,
    InvalidArgument,
    // models
    KTooLarge,
    SingularCovariance,
    TooFewClasses,
    ShapeUnderflow,
    ShapeMismatch,
    NotTrained,
    DivergenceDetected,
    // engine
    RatingMissing,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& what);

// 2 usage, 3 data error, 4 source error, 5 training divergence.
int exit_code_for(ErrorKind kind) noexcept;

}  // namespace bci
