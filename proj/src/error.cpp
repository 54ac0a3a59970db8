#include "sfm/error.hpp"

namespace sfm {

std::string_view to_string(Stage stage) noexcept {
    switch (stage) {
        case Stage::ingest: return "ingest";
        case Stage::config: return "config";
        case Stage::fit_field: return "fit-field";
        case Stage::scores: return "scores";
        case Stage::surface: return "surface";
        case Stage::nu: return "nu";
        case Stage::sample: return "sample";
        case Stage::integrate: return "integrate";
        case Stage::regress: return "regress";
        case Stage::evaluate: return "evaluate";
        case Stage::predict: return "predict";
        case Stage::io: return "io";
    }
    return "unknown";
}

namespace {

std::string strip_label(const std::string& what) {
    // messages are formatted "[stage] text"
    if (!what.empty() && what.front() == '[') {
        auto close = what.find("] ");
        if (close != std::string::npos) return what.substr(close + 2);
    }
    return what;
}

}  // namespace

Error::Error(Stage stage, ErrorKind kind, const std::string& what)
    : std::runtime_error("[" + std::string(to_string(stage)) + "] " + what), stage_(stage), kind_(kind) {}

Error Error::relabel(Stage outer) const {
    if (outer == stage_) return *this;
    return Error(outer, kind_, std::string(to_string(stage_)) + ": " + strip_label(what()));
}

void fail_validation(Stage stage, const std::string& what) {
    throw Error(stage, ErrorKind::validation, what);
}

void fail_numerical(Stage stage, const std::string& what) {
    throw Error(stage, ErrorKind::numerical, what);
}

}  // namespace sfm
