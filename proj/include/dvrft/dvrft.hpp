#pragma once

/// @file
/// Umbrella header.

#include "dvrft/errors.hpp"
#include "dvrft/lti.hpp"
#include "dvrft/io.hpp"
#include "dvrft/vrft.hpp"
#include "dvrft/dissipativity.hpp"
#include "dvrft/cls.hpp"
#include "dvrft/synthesis.hpp"
#include "dvrft/artifacts.hpp"
#include "dvrft/config.hpp"
#include "dvrft/gripper.hpp"
#include "dvrft/version.hpp"
