#pragma once

#include <stdexcept>
#include <string>

namespace tableqa {

// Base class for every error the toolkit raises on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// core model
struct UnknownColumn : Error {
    explicit UnknownColumn(const std::string& column)
        : Error("unknown column: " + column) {}
};
struct BadIndex : Error {
    explicit BadIndex(const std::string& what) : Error("bad index: " + what) {}
};

// ingest
struct EmptyTable : Error {
    explicit EmptyTable(const std::string& why) : Error("empty table: " + why) {}
};
struct MalformedRecord : Error {
    MalformedRecord(std::size_t line_number, const std::string& reason)
        : Error("malformed record at line " + std::to_string(line_number) + ": " + reason),
          line(line_number) {}
    std::size_t line;
};
struct DuplicateId : Error {
    explicit DuplicateId(const std::string& id) : Error("duplicate record id: " + id) {}
};

// promptkit
struct EmptyPool : Error {
    EmptyPool() : Error("example pool is empty") {}
};
struct BudgetTooSmall : Error {
    BudgetTooSmall(std::size_t needed, std::size_t budget)
        : Error("prompt budget too small: mandatory segments need " + std::to_string(needed) +
                " chars, budget is " + std::to_string(budget)) {}
};

// synthgen
struct NoNumericData : Error {
    explicit NoNumericData(const std::string& column)
        : Error("column has no numeric cells: " + column) {}
};
struct UnparseableCompletion : Error {
    explicit UnparseableCompletion(const std::string& completion)
        : Error("completion does not contain a Q:/A: pair: " + completion) {}
};

// llm gateway
struct AuthError : Error {
    explicit AuthError(const std::string& why) : Error("authentication failed: " + why) {}
};
struct RateLimited : Error {
    explicit RateLimited(const std::string& why) : Error("rate limited: " + why) {}
};
struct TransportError : Error {
    explicit TransportError(const std::string& why) : Error("transport error: " + why) {}
};
struct MalformedResponse : Error {
    explicit MalformedResponse(const std::string& why) : Error("malformed response: " + why) {}
};
struct CacheCorrupt : Error {
    explicit CacheCorrupt(const std::string& path) : Error("corrupt cache entry: " + path) {}
};
struct NoTableFound : Error {
    NoTableFound() : Error("prompt contains no serialized table") {}
};
struct NoQuestionFound : Error {
    NoQuestionFound() : Error("prompt does not end with a question") {}
};

// cli
struct UsageError : Error {
    using Error::Error;
};

}  // namespace tableqa
