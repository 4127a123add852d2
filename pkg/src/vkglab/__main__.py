import sys

from vkglab.cli import main

sys.exit(main())
