#pragma once

#include "hamts/config.hpp"
#include "hamts/driver.hpp"

// Convenience umbrella header; the individual headers are self-contained.
