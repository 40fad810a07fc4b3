#pragma once

#include "holokit/correction.hpp"
#include "holokit/errors.hpp"
#include "holokit/gauge.hpp"
#include "holokit/linalg.hpp"
#include "holokit/models.hpp"
#include "holokit/random.hpp"
#include "holokit/studies.hpp"
#include "holokit/transport.hpp"
#include "holokit/version.hpp"
