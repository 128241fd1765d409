#pragma once

#include "ordinal/config.hpp"
#include "ordinal/data.hpp"
#include "ordinal/decode.hpp"
#include "ordinal/error.hpp"
#include "ordinal/gradcheck.hpp"
#include "ordinal/harness.hpp"
#include "ordinal/heads.hpp"
#include "ordinal/model.hpp"
#include "ordinal/netcore.hpp"
#include "ordinal/qwk.hpp"
#include "ordinal/tensor.hpp"
