#pragma once

#include <stdexcept>
#include <string>

namespace geotracknet {

// Error categories map 1:1 onto CLI exit codes (config=1, data=2, numeric=3).
class Error : public std::runtime_error {
 public:
  enum class Category { config = 1, data = 2, numeric = 3 };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const { return category_; }

 private:
  Category category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Category::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(Category::data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(Category::numeric, what) {}
};

class IoError : public DataError {
 public:
  explicit IoError(const std::string& what) : DataError(what) {}
};

class ShapeError : public DataError {
 public:
  explicit ShapeError(const std::string& what) : DataError(what) {}
};

class DomainError : public DataError {
 public:
  explicit DomainError(const std::string& what) : DataError(what) {}
};

class GradError : public NumericError {
 public:
  explicit GradError(const std::string& what) : NumericError(what) {}
};

class NonFiniteGradient : public NumericError {
 public:
  explicit NonFiniteGradient(const std::string& what) : NumericError(what) {}
};

class NonFiniteValue : public NumericError {
 public:
  explicit NonFiniteValue(const std::string& what) : NumericError(what) {}
};

}  // namespace geotracknet
