#  Copyright (c) Michele De Stefano - 2026.
