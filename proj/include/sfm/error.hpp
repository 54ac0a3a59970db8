#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sfm {

/// Pipeline stage an error originated from.
enum class Stage {
    ingest,
    config,
    fit_field,
    scores,
    surface,
    nu,
    sample,
    integrate,
    regress,
    evaluate,
    predict,
    io,
};

/// Validation errors are caller mistakes (bad input, bad config); numerical
/// errors mean the computation itself broke down.
enum class ErrorKind { validation, numerical };

std::string_view to_string(Stage stage) noexcept;

class Error : public std::runtime_error {
public:
    Error(Stage stage, ErrorKind kind, const std::string& what);

    Stage stage() const noexcept { return stage_; }
    ErrorKind kind() const noexcept { return kind_; }

    /// Same error relabelled with an outer stage; keeps the original message.
    Error relabel(Stage outer) const;

private:
    Stage stage_;
    ErrorKind kind_;
};

[[noreturn]] void fail_validation(Stage stage, const std::string& what);
[[noreturn]] void fail_numerical(Stage stage, const std::string& what);

}  // namespace sfm
