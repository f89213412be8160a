#include "bci/error.hpp"

namespace bci {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::BadHeader: return "BadHeader";
        case ErrorKind::BadFooter: return "BadFooter";
        case ErrorKind::ShortPacket: return "ShortPacket";
        case ErrorKind::ScheduleGap: return "ScheduleGap";
        case ErrorKind::SourceUnavailable: return "SourceUnavailable";
        case ErrorKind::DesyncDetected: return "DesyncDetected";
        case ErrorKind::Overflow: return "Overflow";
        case ErrorKind::SourceLost: return "SourceLost";
        case ErrorKind::InvalidBand: return "InvalidBand";
        case ErrorKind::UnstableDesign: return "UnstableDesign";
        case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
        case ErrorKind::EmptyDataset: return "EmptyDataset";
        case ErrorKind::FormatVersionMismatch: return "FormatVersionMismatch";
        case ErrorKind::CorruptFile: return "CorruptFile";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::KTooLarge: return "KTooLarge";
        case ErrorKind::SingularCovariance: return "SingularCovariance";
        case ErrorKind::TooFewClasses: return "TooFewClasses";
        case ErrorKind::ShapeUnderflow: return "ShapeUnderflow";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::NotTrained: return "NotTrained";
        case ErrorKind::DivergenceDetected: return "DivergenceDetected";
        case ErrorKind::RatingMissing: return "RatingMissing";
    }
    return "Unknown";
}

void raise(ErrorKind kind, const std::string& what) {
    throw Error(kind, std::string(to_string(kind)) + ": " + what);
}

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument:
        case ErrorKind::InvalidBand:
        case ErrorKind::KTooLarge:
        case ErrorKind::ShapeUnderflow:
            return 2;
        case ErrorKind::SourceUnavailable:
        case ErrorKind::DesyncDetected:
        case ErrorKind::Overflow:
        case ErrorKind::SourceLost:
        case ErrorKind::BadHeader:
        case ErrorKind::BadFooter:
        case ErrorKind::ShortPacket:
            return 4;
        case ErrorKind::DivergenceDetected:
            return 5;
        default:
            return 3;
    }
}

}  // namespace bci
