#pragma once

#include <stdexcept>
#include <string>

namespace tierplan {

enum class errc {
    unknown_rule_kind,
    scale_overflow,
    unknown_template,
    invalid_workflow,
    parse_error,
    no_profile_data,
    empty_candidate_set,
    cap_exceeded,
    inconsistent_stage_sets,
    too_few_rows,
    degenerate_variance,
    non_positive_mean,
    too_few_leaves,
    insufficient_data,
    length_mismatch,
    missing_scale_data,
    no_feasible_configuration,
    io_error,
};

const char *errc_name(errc c);

class error : public std::runtime_error {
  public:
    error(errc code, const std::string &msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    errc code() const { return code_; }

  private:
    errc code_;
};

} // namespace tierplan
