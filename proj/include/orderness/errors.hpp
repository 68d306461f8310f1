// Error taxonomy shared by all orderness components.
#pragma once

#include <stdexcept>
#include <string>

namespace orderness {

enum class Err {
    InvalidArgument,
    EmptyInput,
    GridTooSmall,
    DegenerateDenominator,
    ScaleTooLarge,
    AllChannelsDegenerate,
    TooFewBlocks,
    BadMagic,
    TruncatedFile,
    CountMismatch,
    LabelOutOfRange,
    SubsetTooLarge,
    DegenerateSplit,
    IoError,
    ShapeMismatch,
    DivergedLoss,
    KernelTooSmall,
    AllSlicesDegenerate,
};

inline const char* err_name(Err e) {
    switch (e) {
        case Err::InvalidArgument: return "InvalidArgument";
        case Err::EmptyInput: return "EmptyInput";
        case Err::GridTooSmall: return "GridTooSmall";
        case Err::DegenerateDenominator: return "DegenerateDenominator";
        case Err::ScaleTooLarge: return "ScaleTooLarge";
        case Err::AllChannelsDegenerate: return "AllChannelsDegenerate";
        case Err::TooFewBlocks: return "TooFewBlocks";
        case Err::BadMagic: return "BadMagic";
        case Err::TruncatedFile: return "TruncatedFile";
        case Err::CountMismatch: return "CountMismatch";
        case Err::LabelOutOfRange: return "LabelOutOfRange";
        case Err::SubsetTooLarge: return "SubsetTooLarge";
        case Err::DegenerateSplit: return "DegenerateSplit";
        case Err::IoError: return "IoError";
        case Err::ShapeMismatch: return "ShapeMismatch";
        case Err::DivergedLoss: return "DivergedLoss";
        case Err::KernelTooSmall: return "KernelTooSmall";
        case Err::AllSlicesDegenerate: return "AllSlicesDegenerate";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Err code, const std::string& what)
        : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}

    Err code() const { return code_; }

private:
    Err code_;
};

[[noreturn]] inline void raise(Err code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Err code, const std::string& what) {
    if (!ok) raise(code, what);
}

} // namespace orderness
