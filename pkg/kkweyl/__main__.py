import sys

from kkweyl.cli import main


sys.exit(main())
