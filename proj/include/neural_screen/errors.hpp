#pragma once

#include <stdexcept>
#include <string>

namespace nscreen {

//! Base class for every error raised by the library.
class screen_error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class shape_error : public screen_error
{
public:
  using screen_error::screen_error;
};

class training_diverged : public screen_error
{
public:
  training_diverged(int epoch, const std::string& what)
    : screen_error(what)
    , epoch_(epoch)
  {}
  int epoch() const { return epoch_; }

private:
  int epoch_;
};

class insufficient_samples : public screen_error
{
public:
  using screen_error::screen_error;
};

class degenerate_input : public screen_error
{
public:
  using screen_error::screen_error;
};

class boundary_violation : public screen_error
{
public:
  using screen_error::screen_error;
};

class fold_size_error : public screen_error
{
public:
  using screen_error::screen_error;
};

class parse_error : public screen_error
{
public:
  parse_error(const std::string& what, long row, long column)
    : screen_error(what)
    , row_(row)
    , column_(column)
  {}
  long row() const { return row_; }
  long column() const { return column_; }

private:
  long row_;
  long column_;
};

class schema_error : public screen_error
{
public:
  using screen_error::screen_error;
};

//! Wraps an error raised inside one pipeline stage.
class stage_error : public screen_error
{
public:
  stage_error(std::string stage, const std::string& what)
    : screen_error(stage + ": " + what)
    , stage_(std::move(stage))
  {}
  const std::string& stage() const { return stage_; }

private:
  std::string stage_;
};

} // namespace nscreen
