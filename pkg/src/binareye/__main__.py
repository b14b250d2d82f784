import sys

from binareye.cli import main

sys.exit(main())
