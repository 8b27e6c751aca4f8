import sys

from marginlp.cli import main

sys.exit(main())
