import sys

from rpbauction.cli import main

sys.exit(main())
