#pragma once

#include <stdexcept>
#include <string>

namespace gradepipe {

// Maps onto the CLI exit codes: Validation -> 2, Backend -> 3, Io -> 4.
enum class ErrorCategory { Validation, Backend, Io };

inline int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Validation: return 2;
    case ErrorCategory::Backend: return 3;
    case ErrorCategory::Io: return 4;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string code, const std::string& message)
      : std::runtime_error(message), category_(category), code_(std::move(code)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorCategory category_;
  std::string code_;
};

#define GRADEPIPE_DEFINE_ERROR(Name, Category)                          \
  class Name : public ::gradepipe::Error {                              \
   public:                                                              \
    explicit Name(const std::string& message)                           \
        : ::gradepipe::Error(::gradepipe::ErrorCategory::Category, #Name, message) {} \
  }

// core / ingest
GRADEPIPE_DEFINE_ERROR(ParseError, Validation);
GRADEPIPE_DEFINE_ERROR(ManifestParseError, Validation);
GRADEPIPE_DEFINE_ERROR(DuplicateRegion, Validation);
GRADEPIPE_DEFINE_ERROR(DanglingRubric, Validation);
GRADEPIPE_DEFINE_ERROR(PolicyReferencesScores, Validation);
GRADEPIPE_DEFINE_ERROR(ValidationError, Validation);

// prompting
GRADEPIPE_DEFINE_ERROR(EmptyStatement, Validation);
GRADEPIPE_DEFINE_ERROR(RubricQuestionMismatch, Validation);
GRADEPIPE_DEFINE_ERROR(TemplateError, Validation);
GRADEPIPE_DEFINE_ERROR(MalformedDraft, Backend);

// backend
GRADEPIPE_DEFINE_ERROR(BackendError, Backend);
GRADEPIPE_DEFINE_ERROR(TransportError, Backend);
GRADEPIPE_DEFINE_ERROR(MalformedOutput, Backend);
GRADEPIPE_DEFINE_ERROR(ScoreOutOfRange, Backend);

// grade
GRADEPIPE_DEFINE_ERROR(EmptyRuns, Validation);
GRADEPIPE_DEFINE_ERROR(MixedRubrics, Validation);

// analytics
GRADEPIPE_DEFINE_ERROR(EmptyInput, Validation);
GRADEPIPE_DEFINE_ERROR(RaggedRuns, Validation);
GRADEPIPE_DEFINE_ERROR(KeyMismatch, Validation);

// messaging
GRADEPIPE_DEFINE_ERROR(DuplicateQuestion, Validation);

// review
GRADEPIPE_DEFINE_ERROR(NotFound, Validation);
GRADEPIPE_DEFINE_ERROR(Conflict, Validation);

GRADEPIPE_DEFINE_ERROR(IoError, Io);

}  // namespace gradepipe
