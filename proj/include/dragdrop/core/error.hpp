#pragma once

#include <stdexcept>
#include <string>

namespace dragdrop {

/// Input data that cannot be used: unreadable files, malformed headers, bad payloads.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public DataError {
 public:
  IoError(const std::string& path, const std::string& what) : DataError(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Schema violation; `pointer` is a JSON pointer into the offending document.
class SchemaError : public DataError {
 public:
  SchemaError(const std::string& pointer, const std::string& what)
      : DataError((pointer.empty() ? std::string("/") : pointer) + ": " + what), pointer_(pointer), detail_(what) {}
  const std::string& pointer() const { return pointer_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string pointer_;
  std::string detail_;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Geometry that cannot produce markers or ROIs (sphere outside the volume, centre outside bounds).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dragdrop
