#pragma once

#include "hoa/errors.hpp"
#include "hoa/numcore.hpp"
#include "hoa/model.hpp"
#include "hoa/models.hpp"
#include "hoa/optim.hpp"
#include "hoa/firstorder.hpp"
#include "hoa/tem.hpp"
#include "hoa/oracle.hpp"
#include "hoa/mc.hpp"
#include "hoa/io.hpp"
