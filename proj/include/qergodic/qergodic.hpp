#pragma once

#include "qergodic/error.hpp"
#include "qergodic/model.hpp"
#include "qergodic/structure.hpp"
#include "qergodic/spectral.hpp"
#include "qergodic/paths.hpp"
#include "qergodic/limits.hpp"
#include "qergodic/asymptotics.hpp"
