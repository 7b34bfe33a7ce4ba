import sys

from lbstefan.cli import main

sys.exit(main())
