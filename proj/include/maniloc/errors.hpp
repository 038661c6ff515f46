#pragma once

#include <stdexcept>
#include <string>

namespace maniloc {

/// Distinct validation failure kinds surfaced by loaders and builders.
enum class ValidationCode {
    missing_file,
    malformed_record,
    missing_mask,        // fake sample without a mask path
    missing_image_file,  // referenced image does not exist
    missing_mask_file,   // referenced mask does not exist
    non_binary_mask,
    nonzero_real_mask,  // real sample whose mask has set pixels
    degenerate_labels,
    dimension_mismatch,
    unmatched_triple,
    invalid_argument,
};

inline const char* to_string(ValidationCode code) {
    switch (code) {
        case ValidationCode::missing_file: return "missing file";
        case ValidationCode::malformed_record: return "malformed record";
        case ValidationCode::missing_mask: return "missing mask";
        case ValidationCode::missing_image_file: return "missing image file";
        case ValidationCode::missing_mask_file: return "missing mask file";
        case ValidationCode::non_binary_mask: return "non-binary mask";
        case ValidationCode::nonzero_real_mask: return "non-zero mask on real sample";
        case ValidationCode::degenerate_labels: return "degenerate labels";
        case ValidationCode::dimension_mismatch: return "dimension mismatch";
        case ValidationCode::unmatched_triple: return "unmatched triple";
        case ValidationCode::invalid_argument: return "invalid argument";
    }
    return "unknown";
}

/// Input/config problems the caller can fix. CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
public:
    ValidationError(ValidationCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ValidationCode code() const { return code_; }

private:
    ValidationCode code_;
};

/// Unexpected failures mid-run (I/O errors, NaN loss, subprocess trouble).
/// CLI maps these to exit code 2.
class RuntimeFailure : public std::runtime_error {
public:
    explicit RuntimeFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace maniloc
